"""Linear-optical elements acting exactly on sparse Fock states.

Every element is described by a small unitary mode matrix ``U`` acting on the
creation operators of the modes it touches::

    a_i^dagger  ->  sum_j U[j, i] a_j^dagger

Output modes reuse the registry slots of the input modes, so an element never
changes the registry (the polarizing beam splitter may relabel it). Each basis
term is expanded as a product of multinomials; nothing is truncated.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Iterator, Sequence, Union

import numpy as np

from .fock import FockError, ModeLabel, Occupation, Polarization, PureState


@dataclass(frozen=True)
class BeamSplitterSpec:
    """Beam splitter with intensity transmission ``transmission`` (r = 1 - t)."""

    mode_a: ModeLabel
    mode_b: ModeLabel
    transmission: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.transmission <= 1.0:
            raise FockError(f"transmission {self.transmission} outside [0, 1]")
        if self.mode_a.polarization is not self.mode_b.polarization:
            raise FockError(f"beam splitter pairs {self.mode_a} with {self.mode_b} (polarization mismatch)")

    @property
    def reflection(self) -> float:
        return 1.0 - self.transmission


@dataclass(frozen=True)
class PhaseShift:
    mode: ModeLabel
    angle: float


@dataclass(frozen=True)
class PolarizationRotation:
    spatial: int
    angle: float


@dataclass(frozen=True)
class PolarizingBeamSplitter:
    """PBS on two spatial inputs.

    H from ``in_1`` and V from ``in_2`` leave through ``out_transmitted``;
    V from ``in_1`` and H from ``in_2`` leave through ``out_reflected``.
    Outputs default to the input slots.
    """

    in_1: int
    in_2: int
    out_transmitted: int | None = None
    out_reflected: int | None = None


ElementSpec = Union[BeamSplitterSpec, PhaseShift, PolarizationRotation, PolarizingBeamSplitter]

# phase picked up by every reflected (V) amplitude in a PBS
PBS_REFLECTION_PHASE = 1j


def beam_splitter_matrix(transmission: float) -> np.ndarray:
    """Mode matrix of the beam splitter.

    At t = 1/2 this is a^dag -> (-c^dag + i d^dag)/sqrt2,
    b^dag -> (i c^dag - d^dag)/sqrt2.
    """
    st = math.sqrt(transmission)
    sr = math.sqrt(1.0 - transmission)
    return np.array([[-st, 1j * sr], [1j * sr, -st]], dtype=complex)


def rotation_matrix(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    # columns: images of H^dag and V^dag
    return np.array([[c, -s], [s, c]], dtype=complex)


def _compositions(n: int, rows: Sequence[int]) -> Iterator[tuple[tuple[int, int], ...]]:
    if len(rows) == 1:
        yield ((rows[0], n),)
        return
    for c in range(n + 1):
        for rest in _compositions(n - c, rows[1:]):
            yield ((rows[0], c),) + rest


def _expand_term(occ: Sequence[int], matrix: np.ndarray) -> dict[Occupation, complex]:
    k = matrix.shape[0]
    poly: dict[Occupation, complex] = {(0,) * k: 1.0 + 0j}
    for i, n in enumerate(occ):
        if n == 0:
            continue
        rows = [j for j in range(k) if matrix[j, i] != 0]
        if not rows:
            return {}
        factor_terms = []
        for comp in _compositions(n, rows):
            coeff = complex(math.factorial(n))
            for j, c in comp:
                coeff *= matrix[j, i] ** c / math.factorial(c)
            factor_terms.append((comp, coeff))
        new: dict[Occupation, complex] = {}
        for mono, val in poly.items():
            for comp, coeff in factor_terms:
                m = list(mono)
                for j, c in comp:
                    m[j] += c
                key = tuple(m)
                new[key] = new.get(key, 0j) + val * coeff
        poly = new
    norm_in = math.prod(math.factorial(n) for n in occ)
    return {
        m: v * math.sqrt(math.prod(math.factorial(x) for x in m) / norm_in)
        for m, v in poly.items()
    }


def apply_mode_matrix(state: PureState, modes: Sequence[ModeLabel], matrix) -> PureState:
    """Apply the linear transformation ``matrix`` to the creation operators of ``modes``."""
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.shape != (len(modes), len(modes)):
        raise FockError(f"matrix shape {matrix.shape} does not match {len(modes)} modes")
    idx = [state.index(m) for m in modes]
    if len(set(idx)) != len(idx):
        raise FockError("repeated mode in element")
    cache: dict[Occupation, dict[Occupation, complex]] = {}
    out: dict[Occupation, complex] = {}
    for occ, amp in state.terms.items():
        local = tuple(occ[i] for i in idx)
        if local not in cache:
            cache[local] = _expand_term(local, matrix)
        for new_local, coeff in cache[local].items():
            key = list(occ)
            for i, n in zip(idx, new_local):
                key[i] = n
            key = tuple(key)
            out[key] = out.get(key, 0j) + amp * coeff
    return PureState(state.modes, out)


def apply_beam_splitter(state: PureState, spec: BeamSplitterSpec) -> PureState:
    return apply_mode_matrix(state, (spec.mode_a, spec.mode_b), beam_splitter_matrix(spec.transmission))


def apply_phase_shift(state: PureState, mode: ModeLabel, angle: float) -> PureState:
    i = state.index(mode)
    return PureState(
        state.modes, {occ: amp * cmath.exp(1j * angle * occ[i]) for occ, amp in state.terms.items()}
    )


def _polarized_pair(state: PureState, spatial: int) -> tuple[ModeLabel, ModeLabel]:
    pair = {m.polarization: m for m in state.modes if m.spatial == spatial}
    if Polarization.H not in pair or Polarization.V not in pair:
        raise FockError(f"spatial mode {spatial} lacks H and V sub-modes")
    return pair[Polarization.H], pair[Polarization.V]


def apply_polarization_rotation(state: PureState, spatial: int, angle: float) -> PureState:
    return apply_mode_matrix(state, _polarized_pair(state, spatial), rotation_matrix(angle))


def apply_pbs(state: PureState, spec: PolarizingBeamSplitter) -> PureState:
    h1, v1 = _polarized_pair(state, spec.in_1)
    h2, v2 = _polarized_pair(state, spec.in_2)
    r = PBS_REFLECTION_PHASE
    # slots: (in1_H, in1_V, in2_H, in2_V) -> (out_t_H, out_t_V, out_r_H, out_r_V)
    matrix = np.array(
        [
            [1, 0, 0, 0],
            [0, 0, 0, r],
            [0, 0, 1, 0],
            [0, r, 0, 0],
        ],
        dtype=complex,
    )
    out = apply_mode_matrix(state, (h1, v1, h2, v2), matrix)
    mapping = {}
    for slot, target in ((spec.in_1, spec.out_transmitted), (spec.in_2, spec.out_reflected)):
        if target is not None and target != slot:
            for m in out.modes:
                if m.spatial == slot:
                    mapping[m] = ModeLabel(target, m.polarization, m.name)
    return out.relabel(mapping) if mapping else out


def apply_element(state: PureState, element: ElementSpec) -> PureState:
    if isinstance(element, BeamSplitterSpec):
        return apply_beam_splitter(state, element)
    if isinstance(element, PhaseShift):
        return apply_phase_shift(state, element.mode, element.angle)
    if isinstance(element, PolarizationRotation):
        return apply_polarization_rotation(state, element.spatial, element.angle)
    if isinstance(element, PolarizingBeamSplitter):
        return apply_pbs(state, element)
    raise TypeError(f"unknown element {element!r}")
