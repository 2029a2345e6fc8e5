"""Sparse multimode Fock states.

A :class:`PureState` is an immutable map from occupation tuples to complex
amplitudes over an ordered registry of :class:`ModeLabel`. Photon number is
conserved by every linear element, so no truncation is ever applied: the
live occupation bound is simply the total photon number of the input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

PRUNE_THRESHOLD = 1e-14

Occupation = tuple[int, ...]


class FockError(ValueError):
    """Raised for malformed states or mode references."""


class Polarization(str, Enum):
    H = "H"
    V = "V"
    NONE = "none"


@dataclass(frozen=True, order=True)
class ModeLabel:
    """A spatial mode index plus an optional polarization sub-mode."""

    spatial: int
    polarization: Polarization = Polarization.NONE
    name: str = field(default="", compare=False)

    def __str__(self) -> str:
        base = self.name or f"m{self.spatial}"
        if self.polarization is Polarization.NONE:
            return base
        return f"{base}_{self.polarization.value}"


def check_registry(modes: Sequence[ModeLabel]) -> tuple[ModeLabel, ...]:
    modes = tuple(modes)
    if len(set(modes)) != len(modes):
        raise FockError(f"duplicate modes in registry: {[str(m) for m in modes]}")
    kinds: dict[int, bool] = {}
    for m in modes:
        polarized = m.polarization is not Polarization.NONE
        if kinds.setdefault(m.spatial, polarized) != polarized:
            raise FockError(f"spatial index {m.spatial} mixes polarized and unpolarized labels")
    return modes


class PureState:
    """Immutable sparse superposition of occupation-number basis states.

    An empty term map is the zero-state marker returned by failed
    conditioning; check :attr:`is_zero` rather than comparing norms.
    """

    __slots__ = ("_modes", "_terms", "_index")

    def __init__(self, modes: Sequence[ModeLabel], terms: Mapping[Occupation, complex]):
        self._modes = check_registry(modes)
        self._index = {m: i for i, m in enumerate(self._modes)}
        width = len(self._modes)
        clean: dict[Occupation, complex] = {}
        for occ, amp in terms.items():
            occ = tuple(int(n) for n in occ)
            if len(occ) != width:
                raise FockError(f"occupation {occ} does not match {width} registered modes")
            if any(n < 0 for n in occ):
                raise FockError(f"negative occupation in {occ}")
            amp = complex(amp)
            if abs(amp) >= PRUNE_THRESHOLD:
                clean[occ] = amp
        self._terms = MappingProxyType(dict(sorted(clean.items())))

    @classmethod
    def zero(cls, modes: Sequence[ModeLabel]) -> PureState:
        return cls(modes, {})

    @property
    def modes(self) -> tuple[ModeLabel, ...]:
        return self._modes

    @property
    def terms(self) -> Mapping[Occupation, complex]:
        return self._terms

    @property
    def is_zero(self) -> bool:
        return not self._terms

    def index(self, mode: ModeLabel) -> int:
        try:
            return self._index[mode]
        except KeyError:
            raise FockError(f"mode {mode} not in registry") from None

    def amplitude(self, occupations: Iterable[int]) -> complex:
        return self._terms.get(tuple(occupations), 0j)

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self._terms.values()))

    def photon_numbers(self) -> set[int]:
        return {sum(occ) for occ in self._terms}

    def total_photons(self) -> int:
        """Total photon number; raises if the state is not a number eigenstate."""
        numbers = self.photon_numbers()
        if len(numbers) != 1:
            raise FockError(f"state has no definite photon number: {sorted(numbers)}")
        return numbers.pop()

    def max_occupation(self) -> int:
        return max((max(occ, default=0) for occ in self._terms), default=0)

    def scaled(self, factor: complex) -> PureState:
        return PureState(self._modes, {k: factor * v for k, v in self._terms.items()})

    def __add__(self, other: PureState) -> PureState:
        if other.modes != self._modes:
            raise FockError("cannot add states on different registries")
        out = dict(self._terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0j) + v
        return PureState(self._modes, out)

    def __sub__(self, other: PureState) -> PureState:
        return self + other.scaled(-1)

    def __mul__(self, factor: complex) -> PureState:
        return self.scaled(factor)

    __rmul__ = __mul__

    def relabel(self, mapping: Mapping[ModeLabel, ModeLabel]) -> PureState:
        return PureState([mapping.get(m, m) for m in self._modes], self._terms)

    def reordered(self, modes: Sequence[ModeLabel]) -> PureState:
        """Same state with the registry permuted into ``modes`` order."""
        if sorted(modes) != sorted(self._modes):
            raise FockError("reordering must be a permutation of the registry")
        perm = [self.index(m) for m in modes]
        return PureState(modes, {tuple(occ[i] for i in perm): a for occ, a in self._terms.items()})

    def allclose(self, other: PureState, atol: float = 1e-12) -> bool:
        if other.modes != self._modes:
            return False
        keys = set(self._terms) | set(other.terms)
        return all(abs(self.amplitude(k) - other.amplitude(k)) <= atol for k in keys)

    def __repr__(self) -> str:
        if self.is_zero:
            return f"PureState(zero, modes={[str(m) for m in self._modes]})"
        body = " + ".join(f"({a:.6g})|{','.join(map(str, k))}>" for k, a in self._terms.items())
        return f"PureState({body}, modes={[str(m) for m in self._modes]})"


def basis_state(occupations: Sequence[int], registry: Sequence[ModeLabel]) -> PureState:
    if len(occupations) != len(registry):
        raise FockError(
            f"{len(occupations)} occupations given for {len(registry)} modes"
        )
    return PureState(registry, {tuple(occupations): 1.0})


def vacuum(registry: Sequence[ModeLabel]) -> PureState:
    return basis_state([0] * len(registry), registry)


def inner_product(a: PureState, b: PureState) -> complex:
    """<a|b>, conjugate-linear in ``a``."""
    if a.modes != b.modes:
        raise FockError("inner product requires identical registries")
    small, large = (a, b) if len(a.terms) <= len(b.terms) else (b, a)
    total = 0j
    for occ in small.terms:
        total += a.amplitude(occ).conjugate() * b.amplitude(occ)
    return total


def apply_ladder(state: PureState, mode: ModeLabel, kind: str, repetitions: int = 1) -> PureState:
    """Apply ``repetitions`` creation or annihilation operators to ``mode``.

    The result is left unnormalized.
    """
    if kind not in ("create", "annihilate"):
        raise FockError(f"unknown ladder kind {kind!r}")
    if repetitions < 1:
        raise FockError("repetitions must be positive")
    i = state.index(mode)
    out: dict[Occupation, complex] = {}
    for occ, amp in state.terms.items():
        n = occ[i]
        if kind == "annihilate":
            if n < repetitions:
                continue
            m = n - repetitions
            factor = math.sqrt(math.perm(n, repetitions))
        else:
            m = n + repetitions
            factor = math.sqrt(math.perm(m, repetitions))
        new = occ[:i] + (m,) + occ[i + 1:]
        out[new] = out.get(new, 0j) + factor * amp
    return PureState(state.modes, out)


def tensor_product(a: PureState, b: PureState) -> PureState:
    overlap = set(a.modes) & set(b.modes)
    if overlap:
        raise FockError(f"overlapping modes: {sorted(str(m) for m in overlap)}")
    terms = {
        ka + kb: va * vb for ka, va in a.terms.items() for kb, vb in b.terms.items()
    }
    return PureState(a.modes + b.modes, terms)


def normalize(state: PureState) -> tuple[PureState, float]:
    """Return the unit-norm state and the original norm.

    A zero input gives back the zero marker with norm 0.
    """
    norm = state.norm()
    if norm == 0.0:
        return PureState.zero(state.modes), 0.0
    return state.scaled(1.0 / norm), norm
