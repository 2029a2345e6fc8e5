"""Detection-conditioned NOON-state protocols.

Builders produce a :class:`Circuit`: a list of element groups, each group
bringing in fresh vacuum ancillae, mixing them with the main modes ``a`` and
``b``, and ending in detection events that remove the ancillae again. Keeping
the ancillae short-lived bounds the live registry to six modes.

Even N (two-photon subtraction per element)::

    a --BS(t)-- a'          the reflected arms c, d meet on a 50:50 splitter
    b --BS(t)-- b'          and the element is kept on one click in each output.

The relative phase of an element is applied to the tapped arm ``d`` (half
the angle, since two photons pass), which makes the conditioned action
exactly a^2 + e^{i phi} b^2.

Odd N (one-photon subtraction per element): the tapped arms meet on a
polarizing beam splitter after a pi/2 rotation of ``d``, so both possible
photons reach the same detector arm ``c'``; the other arm is traced out.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Sequence, Union

from .fock import FockError, ModeLabel, Polarization, PureState, basis_state, tensor_product, vacuum
from .measurement import DetectorModel, EnsembleState, PovmElement, apply_povm, build_efficiency_povm, trace_out_mode
from .optics import (
    BeamSplitterSpec,
    ElementSpec,
    PhaseShift,
    PolarizationRotation,
    PolarizingBeamSplitter,
    apply_element,
)

H, V, NONE = Polarization.H, Polarization.V, Polarization.NONE

MODE_A = ModeLabel(0, NONE, "a")
MODE_B = ModeLabel(1, NONE, "b")
MAIN_MODES = (MODE_A, MODE_B)


class PhaseVariant(str, Enum):
    PAPER_EVEN = "paper-even"
    PAPER_ODD = "paper-odd"
    EXACT_TARGET = "exact-target"


class DetectionBasis(str, Enum):
    DIAGONAL = "diagonal-projection"
    INSENSITIVE = "polarization-insensitive"


@dataclass(frozen=True)
class PhaseSchedule:
    phases: tuple[float, ...]
    variant: PhaseVariant


@dataclass(frozen=True)
class Detect:
    """One detector over ``modes`` (summed photon number) registering ``clicks``."""

    modes: tuple[ModeLabel, ...]
    clicks: int


@dataclass(frozen=True)
class TraceOut:
    modes: tuple[ModeLabel, ...]


DetectionEvent = Union[Detect, TraceOut]


@dataclass(frozen=True)
class ElementGroup:
    ancillae: tuple[ModeLabel, ...]
    elements: tuple[ElementSpec, ...]
    events: tuple[DetectionEvent, ...]
    transmission: float
    phase: float


@dataclass(frozen=True)
class Circuit:
    main_modes: tuple[ModeLabel, ...]
    input_occupations: tuple[int, ...]
    groups: tuple[ElementGroup, ...]
    detector: DetectorModel = DetectorModel()
    target_photons: int = 0
    kind: str = "even"
    basis: DetectionBasis | None = None


@dataclass
class ProtocolReport:
    output: EnsembleState
    success_probability: float
    fidelity: float
    achieved_phase: float
    element_probabilities: list[float] = field(default_factory=list)
    target_photons: int = 0
    transmissions: list[float] = field(default_factory=list)
    phases: list[float] = field(default_factory=list)

    @property
    def heralded(self) -> bool:
        return self.success_probability > 0.0


# --------------------------------------------------------------------- targets


def target_noon(P: int, Q: int, phase: float = 0.0, modes: Sequence[ModeLabel] = MAIN_MODES) -> PureState:
    """(|P,Q> + e^{i phase}|Q,P>)/sqrt2, or the single ket |P,P> when P == Q."""
    if P == Q:
        return basis_state([P, P], modes)
    s = 1.0 / math.sqrt(2.0)
    return PureState(modes, {(P, Q): s, (Q, P): s * cmath.exp(1j * phase)})


def noon_fidelity(ensemble: EnsembleState, N: int) -> tuple[float, float]:
    """Fidelity against |N::0>^phi maximized over phi, and the maximizing phi.

    With alpha, beta the |N,0> and |0,N> amplitudes of each branch the overlap
    is (|alpha|^2 + |beta|^2 + 2 Re(e^{-i phi} conj(alpha) beta)) / 2, so the
    optimum is closed form.
    """
    if ensemble.is_zero:
        return 0.0, 0.0
    if len(ensemble.modes) != 2:
        raise FockError("NOON fidelity needs a two-mode ensemble")
    if N == 0:
        return sum(w * abs(s.amplitude((0, 0))) ** 2 for w, s in ensemble.branches), 0.0
    pop = 0.0
    coh = 0j
    for w, s in ensemble.branches:
        alpha = s.amplitude((N, 0))
        beta = s.amplitude((0, N))
        pop += w * (abs(alpha) ** 2 + abs(beta) ** 2)
        coh += w * alpha.conjugate() * beta
    value = min(max((pop + 2.0 * abs(coh)) / 2.0, 0.0), 1.0)
    phase = cmath.phase(coh) % (2.0 * math.pi) if abs(coh) > 0 else 0.0
    if phase < 1e-12 or abs(phase - 2.0 * math.pi) < 1e-9:
        phase = 0.0
    return value, phase


# --------------------------------------------------------------------- phases


def resolve_phase_roots(N: int, variant: PhaseVariant | str) -> PhaseSchedule:
    """Phase schedule for an N-photon stack.

    ``exact-target`` picks e^{i phi_k} as the M = N/2 roots of
    z^M = (-1)^(M+1), which makes prod_k (x + e^{i phi_k} y) = x^M + y^M.
    """
    variant = PhaseVariant(variant)
    if N < 2:
        raise FockError("N must be at least 2")
    if variant is PhaseVariant.PAPER_ODD:
        if N % 2 == 0:
            raise FockError(f"paper-odd schedule needs odd N, got {N}")
        return PhaseSchedule(tuple(2 * math.pi * k / N for k in range(1, N + 1)), variant)
    if N % 2:
        raise FockError(f"{variant.value} schedule needs even N, got {N}")
    M = N // 2
    if variant is PhaseVariant.PAPER_EVEN or M % 2 == 1:
        phases = tuple(4 * math.pi * k / N for k in range(1, M + 1))
    else:
        phases = tuple(2 * math.pi * (2 * k - 1) / N for k in range(1, M + 1))
    return PhaseSchedule(phases, variant)


def _check_schedule(values: Sequence[float] | None, length: int, default: float, what: str) -> list[float]:
    if values is None:
        return [default] * length
    values = list(values)
    if len(values) != length:
        raise FockError(f"{what} schedule has length {len(values)}, expected {length}")
    return values


def _phases(phases: PhaseSchedule | Sequence[float] | None, N: int, variant: PhaseVariant, length: int) -> list[float]:
    if phases is None:
        phases = resolve_phase_roots(N, variant)
    if isinstance(phases, PhaseSchedule):
        phases = phases.phases
    return _check_schedule(phases, length, 0.0, "phase")


# --------------------------------------------------------------------- builders


def _transmissions(transmissions, N: int, length: int) -> list[float]:
    if transmissions is None or transmissions == "optimal":
        return [optimal_transmission(N)] * length
    if isinstance(transmissions, (int, float, Fraction)):
        return [float(transmissions)] * length
    return [float(t) for t in _check_schedule(transmissions, length, 0.0, "transmission")]


def build_even_circuit(
    N: int,
    transmissions: Sequence[float] | float | str | None = None,
    phases: PhaseSchedule | Sequence[float] | None = None,
    detector: DetectorModel = DetectorModel(),
) -> Circuit:
    """Stack of N/2 two-photon subtraction elements acting on |N,N>.

    ``transmissions`` defaults to (N-1)/N on every element.
    """
    if N < 2 or N % 2:
        raise FockError(f"even circuit needs even N >= 2, got {N}")
    M = N // 2
    ts = _transmissions(transmissions, N, M)
    phis = _phases(phases, N, PhaseVariant.PAPER_EVEN, M)
    a, b = MAIN_MODES
    c = ModeLabel(2, NONE, "c")
    d = ModeLabel(3, NONE, "d")
    groups = []
    for t, phi in zip(ts, phis):
        groups.append(
            ElementGroup(
                ancillae=(c, d),
                elements=(
                    BeamSplitterSpec(a, c, t),
                    BeamSplitterSpec(b, d, t),
                    PhaseShift(d, phi / 2.0),
                    BeamSplitterSpec(c, d, 0.5),
                ),
                events=(Detect((c,), 1), Detect((d,), 1)),
                transmission=t,
                phase=phi,
            )
        )
    return Circuit(MAIN_MODES, (N, N), tuple(groups), detector, N, "even")


def build_odd_circuit(
    N: int,
    transmissions: Sequence[float] | float | str | None = None,
    phases: PhaseSchedule | Sequence[float] | None = None,
    basis: DetectionBasis | str = DetectionBasis.DIAGONAL,
    detector: DetectorModel = DetectorModel(),
) -> Circuit:
    """Stack of N single-photon subtraction elements acting on |N,N>.

    With the diagonal basis the click photon is analysed onto (|H>+|V>)/sqrt2:
    a rotation by -pi/4 followed by one click behind the H port and none
    behind the V port. The insensitive basis counts the photon whatever its
    polarization, which leaves the path recorded in the polarization.
    """
    if N < 1 or N % 2 == 0:
        raise FockError(f"odd circuit needs odd N, got {N}")
    basis = DetectionBasis(basis)
    ts = _transmissions(transmissions, max(N, 2), N)
    if phases is None and N == 1:
        phases = [0.0]
    phis = _phases(phases, N, PhaseVariant.PAPER_ODD, N)
    a = ModeLabel(0, H, "a")
    b = ModeLabel(1, H, "b")
    c_h, c_v = ModeLabel(2, H, "c"), ModeLabel(2, V, "c")
    d_h, d_v = ModeLabel(3, H, "d"), ModeLabel(3, V, "d")
    if basis is DetectionBasis.DIAGONAL:
        analysis: tuple[ElementSpec, ...] = (PolarizationRotation(2, -math.pi / 4),)
        detect: tuple[DetectionEvent, ...] = (Detect((c_h,), 1), Detect((c_v,), 0))
    else:
        analysis = ()
        detect = (Detect((c_h, c_v), 1),)
    groups = []
    for t, phi in zip(ts, phis):
        groups.append(
            ElementGroup(
                ancillae=(c_h, c_v, d_h, d_v),
                elements=(
                    BeamSplitterSpec(a, c_h, t),
                    BeamSplitterSpec(b, d_h, t),
                    PhaseShift(d_h, phi),
                    PolarizationRotation(3, math.pi / 2),
                    PolarizingBeamSplitter(2, 3),
                )
                + analysis,
                events=detect + (TraceOut((d_h, d_v)),),
                transmission=t,
                phase=phi,
            )
        )
    return Circuit((a, b), (N, N), tuple(groups), detector, N, "odd", basis)


# --------------------------------------------------------------------- runner


def _detection_element(detector: DetectorModel, clicks: int, bound: int) -> PovmElement:
    return build_efficiency_povm(detector, clicks, max(bound, clicks))


def run_group(ensemble: EnsembleState, group: ElementGroup, detector: DetectorModel) -> tuple[EnsembleState, float]:
    """Introduce the group's ancillae, apply its elements, then its detection events."""
    if ensemble.is_zero:
        return ensemble, 0.0
    fresh = vacuum(group.ancillae)
    branches = []
    for w, s in ensemble.branches:
        s = tensor_product(s, fresh)
        for el in group.elements:
            s = apply_element(s, el)
        branches.append((w, s))
    state = EnsembleState(branches)
    prob = 1.0
    for event in group.events:
        if isinstance(event, TraceOut):
            state = trace_out_mode(state, event.modes)
            continue
        bound = state.photon_bound() * len(event.modes)
        element = _detection_element(detector, event.clicks, bound)
        state, p = apply_povm(state, event.modes, element)
        prob *= p
        if p == 0.0:
            return state, 0.0
    return state, prob


def run_circuit(circuit: Circuit) -> ProtocolReport:
    """Run every group in order and score the result against |N::0>^phi."""
    state = EnsembleState.pure(basis_state(circuit.input_occupations, circuit.main_modes))
    probs: list[float] = []
    for group in circuit.groups:
        state, p = run_group(state, group, circuit.detector)
        probs.append(p)
        if p == 0.0:
            break
    success = math.prod(probs) if probs else 1.0
    if success == 0.0:
        return ProtocolReport(
            EnsembleState([], circuit.main_modes), 0.0, 0.0, 0.0, probs, circuit.target_photons,
            [g.transmission for g in circuit.groups], [g.phase for g in circuit.groups],
        )
    fid, phase = noon_fidelity(state, circuit.target_photons)
    return ProtocolReport(
        state,
        success,
        fid,
        phase,
        probs,
        circuit.target_photons,
        [g.transmission for g in circuit.groups],
        [g.phase for g in circuit.groups],
    )


def nested_element(
    left: PureState,
    right: PureState,
    transmission: float = 0.5,
    phase: float = math.pi,
    detector: DetectorModel = DetectorModel(),
) -> ProtocolReport:
    """Even element with NOON states on both the main and the tap input ports.

    ``left`` feeds a, b and ``right`` feeds the tap ports c, d. A phase shifter
    of ``phase / N`` on port d adds ``phase`` to the relative phase of the
    right input; with this splitter convention the two inputs must differ by
    pi in relative phase for the heralded output to be |2N-2::0>. The result
    is scored against |2N-2::0>^phi.
    """
    n_left, n_right = left.total_photons(), right.total_photons()
    if n_left != n_right:
        raise FockError(f"nested element needs equal photon numbers, got {n_left} and {n_right}")
    if len(left.modes) != 2 or len(right.modes) != 2:
        raise FockError("nested element inputs must be two-mode states")
    a, b = MAIN_MODES
    c = ModeLabel(2, NONE, "c")
    d = ModeLabel(3, NONE, "d")
    start = tensor_product(left.relabel(dict(zip(left.modes, (a, b)))), right.relabel(dict(zip(right.modes, (c, d)))))
    group = ElementGroup(
        ancillae=(),
        elements=(
            PhaseShift(d, phase / n_right),
            BeamSplitterSpec(a, c, transmission),
            BeamSplitterSpec(b, d, transmission),
            BeamSplitterSpec(c, d, 0.5),
        ),
        events=(Detect((c,), 1), Detect((d,), 1)),
        transmission=transmission,
        phase=phase,
    )
    state, p = run_group(EnsembleState.pure(start), group, detector)
    target = 2 * n_left - 2
    if p == 0.0:
        return ProtocolReport(EnsembleState([], MAIN_MODES), 0.0, 0.0, 0.0, [0.0], target, [transmission], [phase])
    fid, achieved = noon_fidelity(state, target)
    return ProtocolReport(state, p, fid, achieved, [p], target, [transmission], [phase])


def element_action(circuit: Circuit, group_index: int, m: int, n: int) -> PureState:
    """Unnormalized conditioned output of one group on the input |m, n>.

    Only meaningful for perfect detectors, where the heralded map is a single
    Kraus operator; the amplitude is sqrt(probability) times the branch.
    """
    group = circuit.groups[group_index]
    start = EnsembleState.pure(basis_state([m, n], circuit.main_modes))
    state, p = run_group(start, group, circuit.detector)
    if p == 0.0 or len(state) != 1:
        if len(state) > 1:
            raise FockError("element action is not pure; use perfect detectors")
        return PureState.zero(circuit.main_modes)
    return state.branches[0][1].scaled(math.sqrt(p))


# --------------------------------------------------------------------- closed forms


def reflection_distribution(N: int, t):
    """p_k(N) = C(N,k) t^(N-k) r^k for k = 0..N. Exact if ``t`` is a Fraction."""
    if not 0 <= t <= 1:
        raise FockError(f"transmission {t} outside [0, 1]")
    r = 1 - t
    return [math.comb(N, k) * t ** (N - k) * r**k for k in range(N + 1)]


def transmission_objective(t: float, N: int) -> float:
    """t^(2N-2) (1-t)^2, the single-element two-photon tap weight."""
    return t ** (2 * N - 2) * (1 - t) ** 2


def optimal_transmission(N: int) -> float:
    if N < 2:
        raise FockError(f"optimal transmission needs N >= 2, got {N}")
    return (N - 1) / N


def analytic_success_probability(N: int) -> Fraction:
    """2 (1/4)^N N! / N^N, exactly."""
    if N < 2 or N % 2:
        raise FockError(f"closed form defined for even N >= 2, got {N}")
    return Fraction(2 * math.factorial(N), 4**N * N**N)


def asymptotic_probability(N: int, efficiency: float = 1.0) -> float:
    """sqrt(8 pi N) (eta / 4e)^N, evaluated as the eta = 1 value times eta^N."""
    if N < 1:
        raise FockError("N must be at least 1")
    if not 0.0 <= efficiency <= 1.0:
        raise FockError(f"efficiency {efficiency} outside [0, 1]")
    base = math.sqrt(8 * math.pi * N) * (4 * math.e) ** (-N)
    if efficiency == 1.0:
        return base
    return base * efficiency**N
