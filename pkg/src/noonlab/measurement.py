"""Photon counting, detector POVMs, conditioning and mixed states.

All detector models in scope are diagonal in the photon-number basis, so a
measurement splits each pure branch into number-resolved Kraus branches that
stay pure. Mixed states are therefore kept as weighted lists of pure branches
instead of dense density matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .fock import FockError, ModeLabel, Occupation, PureState, inner_product, normalize

MERGE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class DetectorModel:
    """Detector efficiency and photon-number resolution. Dark counts are zero."""

    efficiency: float = 1.0
    resolving: bool = True
    dark_rate: float = field(default=0.0, init=False)

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise FockError(f"efficiency {self.efficiency} outside [0, 1]")

    @property
    def perfect(self) -> bool:
        return self.efficiency == 1.0 and self.resolving


@dataclass(frozen=True)
class PovmElement:
    """Diagonal POVM element sum_n c_n |n><n| for ``clicks`` registered clicks.

    For a non-resolving detector, ``clicks == 1`` stands for "at least one click".
    Photon numbers beyond ``coefficients`` are out of the declared bound.
    """

    clicks: int
    coefficients: tuple[float, ...]
    resolving: bool = True

    def __post_init__(self):
        for c in self.coefficients:
            if not -1e-15 <= c <= 1.0 + 1e-15:
                raise FockError(f"POVM coefficient {c} outside [0, 1]")

    @property
    def photon_bound(self) -> int:
        return len(self.coefficients) - 1

    def coefficient(self, n: int) -> float:
        if n > self.photon_bound:
            raise FockError(f"photon number {n} exceeds POVM bound {self.photon_bound}")
        return self.coefficients[n]


def build_efficiency_povm(model: DetectorModel, clicks: int, photon_bound: int) -> PovmElement:
    """Binomial-loss POVM element: c_{k,n} = C(n,k) eta^k (1-eta)^(n-k).

    Non-resolving detectors only distinguish 0 from "one or more"; any
    ``clicks >= 1`` then selects the summed click element 1 - (1-eta)^n.
    """
    if clicks < 0 or clicks > photon_bound:
        raise FockError(f"clicks={clicks} outside [0, {photon_bound}]")
    eta = model.efficiency
    if not model.resolving and clicks >= 1:
        coeffs = tuple(1.0 - (1.0 - eta) ** n for n in range(photon_bound + 1))
        return PovmElement(1, coeffs, resolving=False)
    coeffs = tuple(
        math.comb(n, clicks) * eta**clicks * (1.0 - eta) ** (n - clicks) if n >= clicks else 0.0
        for n in range(photon_bound + 1)
    )
    return PovmElement(clicks, coeffs, resolving=model.resolving)


def povm_family(model: DetectorModel, photon_bound: int) -> list[PovmElement]:
    """Complete set of elements for ``model`` up to ``photon_bound`` photons."""
    if model.resolving:
        return [build_efficiency_povm(model, k, photon_bound) for k in range(photon_bound + 1)]
    return [build_efficiency_povm(model, 0, photon_bound), build_efficiency_povm(model, 1, max(photon_bound, 1))]


class EnsembleState:
    """rho = sum_i w_i |psi_i><psi_i| with every branch normalized."""

    __slots__ = ("_branches", "_modes")

    def __init__(self, branches: Sequence[tuple[float, PureState]], modes: Sequence[ModeLabel] | None = None):
        kept = [(float(w), s) for w, s in branches if w > 0.0 and not s.is_zero]
        if modes is None:
            if not kept:
                raise FockError("empty ensemble needs an explicit registry")
            modes = kept[0][1].modes
        self._modes = tuple(modes)
        for _, s in kept:
            if s.modes != self._modes:
                raise FockError("ensemble branches must share one registry")
        self._branches = tuple(kept)

    @classmethod
    def pure(cls, state: PureState) -> EnsembleState:
        unit, norm = normalize(state)
        if norm == 0.0:
            return cls([], state.modes)
        return cls([(1.0, unit)])

    @property
    def branches(self) -> tuple[tuple[float, PureState], ...]:
        return self._branches

    @property
    def modes(self) -> tuple[ModeLabel, ...]:
        return self._modes

    @property
    def is_zero(self) -> bool:
        return not self._branches

    def total_weight(self) -> float:
        return sum(w for w, _ in self._branches)

    def normalized(self) -> EnsembleState:
        total = self.total_weight()
        if total == 0.0:
            return self
        return EnsembleState([(w / total, s) for w, s in self._branches], self._modes)

    def map(self, fn) -> EnsembleState:
        """Apply a norm-preserving map to every branch."""
        return EnsembleState([(w, fn(s)) for w, s in self._branches], None if self._branches else self._modes)

    def merged(self, tol: float = MERGE_TOLERANCE) -> EnsembleState:
        """Merge branches with identical support and amplitudes within ``tol``."""
        out: list[tuple[float, PureState]] = []
        for w, s in self._branches:
            for j, (w2, s2) in enumerate(out):
                if set(s.terms) == set(s2.terms) and s.allclose(s2, tol):
                    out[j] = (w + w2, s2)
                    break
            else:
                out.append((w, s))
        return EnsembleState(out, self._modes)

    def photon_bound(self) -> int:
        return max((s.max_occupation() for _, s in self._branches), default=0)

    def __len__(self) -> int:
        return len(self._branches)

    def __repr__(self) -> str:
        return f"EnsembleState({len(self._branches)} branches, modes={[str(m) for m in self._modes]})"


def _as_modes(mode: ModeLabel | Sequence[ModeLabel]) -> tuple[ModeLabel, ...]:
    return (mode,) if isinstance(mode, ModeLabel) else tuple(mode)


def _split_by_count(state: PureState, modes: tuple[ModeLabel, ...]) -> tuple[list[ModeLabel], dict[Occupation, dict[Occupation, complex]]]:
    """Group terms by the occupations of ``modes``; the measured modes are dropped."""
    idx = [state.index(m) for m in modes]
    if len(set(idx)) != len(idx):
        raise FockError("repeated mode in measurement")
    keep = [i for i in range(len(state.modes)) if i not in idx]
    parts: dict[Occupation, dict[Occupation, complex]] = {}
    for occ, amp in state.terms.items():
        measured = tuple(occ[i] for i in idx)
        rest = tuple(occ[i] for i in keep)
        parts.setdefault(measured, {})[rest] = amp
    return [state.modes[i] for i in keep], parts


def project_photon_number(state: PureState, mode: ModeLabel, n: int) -> tuple[PureState, float]:
    """Project ``mode`` onto |n>, returning the renormalized remainder and its probability."""
    remaining, parts = _split_by_count(state, (mode,))
    total = state.norm() ** 2
    sub = PureState(remaining, parts.get((n,), {}))
    unit, norm = normalize(sub)
    prob = norm**2 / total if total > 0 else 0.0
    return unit, prob


def condition_coincidence(state: PureState, pattern: Mapping[ModeLabel, int]) -> tuple[PureState, float]:
    """Sequential exact projections of every pattern mode onto its count."""
    modes = list(pattern)
    if len(set(modes)) != len(modes):
        raise FockError("overlapping pattern entries")
    for m in modes:
        state.index(m)
    prob = 1.0
    for m in modes:
        state, p = project_photon_number(state, m, pattern[m])
        prob *= p
        if p == 0.0:
            return state, 0.0
    return state, prob


def apply_povm(
    ensemble: EnsembleState, mode: ModeLabel | Sequence[ModeLabel], element: PovmElement
) -> tuple[EnsembleState, float]:
    """Condition on a diagonal POVM outcome of the total photon number in ``mode``.

    ``mode`` may be a tuple of sub-modes seen by one detector (e.g. both
    polarizations of a spatial mode); the detector then responds to their
    summed photon number. The measured modes leave the registry.
    """
    modes = _as_modes(mode)
    if ensemble.is_zero:
        keep = [m for m in ensemble.modes if m not in modes]
        return EnsembleState([], keep), 0.0
    out: list[tuple[float, PureState]] = []
    remaining: list[ModeLabel] = []
    for w, s in ensemble.branches:
        remaining, parts = _split_by_count(s, modes)
        for measured in sorted(parts):
            c = element.coefficient(sum(measured))
            if c == 0.0:
                continue
            sub, norm = normalize(PureState(remaining, parts[measured]))
            if norm == 0.0:
                continue
            out.append((w * c * norm**2, sub))
    result = EnsembleState(out, remaining)
    prob = result.total_weight()
    return result.normalized().merged(), prob


def trace_out_mode(ensemble: EnsembleState, mode: ModeLabel | Sequence[ModeLabel]) -> EnsembleState:
    """Partial trace over ``mode``: one branch per traced occupation, weights kept."""
    modes = _as_modes(mode)
    bound = max(ensemble.photon_bound(), 0)
    accept_all = PovmElement(0, (1.0,) * (bound * len(modes) + 1))
    result, _ = apply_povm(ensemble, modes, accept_all)
    return result


def fidelity(ensemble: EnsembleState | PureState, target: PureState) -> float:
    """sum_i w_i |<target|psi_i>|^2 against a normalized target."""
    if isinstance(ensemble, PureState):
        ensemble = EnsembleState.pure(ensemble)
    if ensemble.modes != target.modes:
        raise FockError("fidelity requires matching registries")
    unit, norm = normalize(target)
    if norm == 0.0:
        raise FockError("fidelity target is the zero state")
    value = sum(w * abs(inner_product(unit, s)) ** 2 for w, s in ensemble.branches)
    return min(max(value, 0.0), 1.0)
