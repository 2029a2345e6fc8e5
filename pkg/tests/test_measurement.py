import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noonlab.fock import FockError, ModeLabel, PureState, basis_state, tensor_product, vacuum
from noonlab.measurement import (
    DetectorModel,
    EnsembleState,
    PovmElement,
    apply_povm,
    build_efficiency_povm,
    condition_coincidence,
    fidelity,
    povm_family,
    project_photon_number,
    trace_out_mode,
)
from noonlab.optics import BeamSplitterSpec, apply_beam_splitter

A, B, C, D = (ModeLabel(i, name=n) for i, n in enumerate("abcd"))
AB = (A, B)
S2 = 1 / math.sqrt(2)
NOON2 = PureState(AB, {(2, 0): S2, (0, 2): S2})


def test_project_noon_arm():
    out, p = project_photon_number(NOON2, B, 0)
    assert p == pytest.approx(0.5)
    assert out.modes == (A,)
    assert out.allclose(basis_state([2], (A,)))


def test_project_hom_output_has_no_coincidence():
    hom = apply_beam_splitter(basis_state([1, 1], AB), BeamSplitterSpec(A, B, 0.5))
    for mode in AB:
        out, p = project_photon_number(hom, mode, 1)
        assert p == 0.0 and out.is_zero


def test_project_product_state():
    out, p = project_photon_number(basis_state([1, 1], AB), B, 1)
    assert p == 1.0 and out.allclose(basis_state([1], (A,)))


def test_project_unknown_mode():
    with pytest.raises(FockError):
        project_photon_number(NOON2, C, 0)


def basic_element_output(t=0.5):
    s = tensor_product(basis_state([2, 2], AB), vacuum((C, D)))
    s = apply_beam_splitter(s, BeamSplitterSpec(A, C, t))
    s = apply_beam_splitter(s, BeamSplitterSpec(B, D, t))
    return apply_beam_splitter(s, BeamSplitterSpec(C, D, 0.5))


def test_coincidence_on_basic_element():
    out, p = condition_coincidence(basic_element_output(), {C: 1, D: 1})
    assert p == pytest.approx(1 / 16, abs=1e-12)
    assert set(out.terms) == {(2, 0), (0, 2)}
    assert abs(out.amplitude([2, 0])) == pytest.approx(S2)
    assert abs(out.amplitude([0, 2])) == pytest.approx(S2)


def test_coincidence_on_empty_detectors():
    psi = tensor_product(NOON2, vacuum((C, D)))
    out, p = condition_coincidence(psi, {C: 0, D: 0})
    assert p == pytest.approx(1.0)
    assert out.allclose(NOON2)


def test_coincidence_beyond_photon_number():
    out, p = condition_coincidence(tensor_product(NOON2, vacuum((C,))), {C: 3})
    assert p == 0.0 and out.is_zero


def test_coincidence_errors():
    with pytest.raises(FockError):
        condition_coincidence(NOON2, {C: 1})


def test_povm_examples():
    perfect = build_efficiency_povm(DetectorModel(1.0), 2, 4)
    assert perfect.coefficients == (0, 0, 1, 0, 0)
    blind = build_efficiency_povm(DetectorModel(0.0), 0, 4)
    assert blind.coefficients == (1, 1, 1, 1, 1)
    half = build_efficiency_povm(DetectorModel(0.5), 1, 2)
    assert half.coefficient(2) == pytest.approx(0.5)
    with pytest.raises(FockError):
        build_efficiency_povm(DetectorModel(0.5), 3, 2)


def test_non_resolving_click_element():
    el = build_efficiency_povm(DetectorModel(0.3, resolving=False), 1, 3)
    assert el.coefficients == pytest.approx([0.0, 0.3, 1 - 0.7**2, 1 - 0.7**3])


@pytest.mark.parametrize("eta", [0.0, 0.25, 0.5, 0.9, 1.0])
@pytest.mark.parametrize("resolving", [True, False])
def test_povm_family_complete(eta, resolving):
    fam = povm_family(DetectorModel(eta, resolving), 5)
    for n in range(6):
        assert sum(el.coefficient(n) for el in fam) == pytest.approx(1.0, abs=1e-12)


def test_perfect_zero_click_on_empty_mode():
    ens = EnsembleState.pure(tensor_product(NOON2, vacuum((C,))))
    out, p = apply_povm(ens, C, build_efficiency_povm(DetectorModel(), 0, 2))
    assert p == pytest.approx(1.0)
    assert fidelity(out, NOON2) == pytest.approx(1.0)


@pytest.mark.parametrize("c00", [0.1, 0.5, 0.7, 0.95])
def test_non_detection_fidelity_equals_c00(c00):
    chi = PureState(AB, {(1, 1): 1.0})
    psi = tensor_product(NOON2, basis_state([0], (D,))).scaled(S2) + tensor_product(chi, basis_state([1], (D,))).scaled(S2)
    e0 = PovmElement(0, (c00, 1.0 - c00, 0.0))
    out, _ = apply_povm(EnsembleState.pure(psi), D, e0)
    assert fidelity(out, NOON2) == pytest.approx(c00, abs=1e-12)


def test_lossy_single_click_mixes_branches():
    x = basis_state([1, 0], AB)
    y = basis_state([0, 1], AB)
    psi = tensor_product(x, basis_state([1], (C,))).scaled(S2) + tensor_product(y, basis_state([2], (C,))).scaled(S2)
    out, p = apply_povm(EnsembleState.pure(psi), C, build_efficiency_povm(DetectorModel(0.5), 1, 2))
    # true single photon: 0.5 * 0.5; two photons with one lost: 0.5 * 2 * 0.5 * 0.5
    assert p == pytest.approx(0.5)
    assert len(out) == 2
    assert fidelity(out, x) == pytest.approx(0.5)
    assert fidelity(out, y) == pytest.approx(0.5)


def test_fidelity_examples():
    assert fidelity(NOON2, NOON2) == pytest.approx(1.0)
    assert fidelity(basis_state([2, 0], AB), basis_state([0, 2], AB)) == 0.0
    mix = EnsembleState([(0.5, basis_state([2, 0], AB)), (0.5, basis_state([0, 2], AB))])
    assert fidelity(mix, NOON2) == pytest.approx(0.5)
    with pytest.raises(FockError):
        fidelity(NOON2, vacuum((A, C)))


def test_trace_out_examples():
    empty = EnsembleState.pure(tensor_product(NOON2, vacuum((C,))))
    traced = trace_out_mode(empty, C)
    assert len(traced) == 1 and fidelity(traced, NOON2) == pytest.approx(1.0)

    w = PureState(AB, {(1, 0): S2, (0, 1): S2})
    arm = trace_out_mode(EnsembleState.pure(w), B)
    assert sorted(wt for wt, _ in arm.branches) == pytest.approx([0.5, 0.5])
    for amp in (S2, 0.3, 0.8):
        beta = math.sqrt(1 - amp**2)
        target = PureState((A,), {(1,): amp, (0,): beta})
        assert fidelity(arm, target) == pytest.approx(0.5 * (amp**2 + beta**2))

    prod = EnsembleState.pure(tensor_product(NOON2, basis_state([3], (C,))))
    assert fidelity(trace_out_mode(prod, C), NOON2) == pytest.approx(1.0)


def test_merge_identical_branches():
    ens = EnsembleState([(0.25, NOON2), (0.25, NOON2), (0.5, basis_state([1, 1], AB))]).merged()
    assert len(ens) == 2
    assert sorted(w for w, _ in ens.branches) == pytest.approx([0.5, 0.5])


occ3 = st.tuples(*[st.integers(0, 3)] * 3)
states3 = st.dictionaries(
    occ3, st.complex_numbers(max_magnitude=2, min_magnitude=1e-3, allow_nan=False, allow_infinity=False),
    min_size=1, max_size=6,
).map(lambda d: PureState((A, B, C), d))


@given(states3, st.floats(0, 1), st.booleans())
@settings(max_examples=60, deadline=None)
def test_povm_probabilities_sum_to_one(psi, eta, resolving):
    ens = EnsembleState.pure(psi)
    total = sum(apply_povm(ens, C, el)[1] for el in povm_family(DetectorModel(eta, resolving), 3))
    assert total == pytest.approx(1.0, abs=1e-12)


@given(states3, st.integers(0, 3))
@settings(max_examples=60, deadline=None)
def test_projection_idempotent(psi, n):
    once, p = project_photon_number(psi, C, n)
    if p == 0.0:
        return
    # re-attach the mode in the measured state and condition again
    again, p2 = project_photon_number(tensor_product(once, basis_state([n], (C,))), C, n)
    assert p2 == pytest.approx(1.0)
    assert again.allclose(once, atol=1e-12)


@given(states3, st.integers(0, 3))
@settings(max_examples=60, deadline=None)
def test_perfect_povm_matches_projection(psi, n):
    proj, p = project_photon_number(psi, C, n)
    out, q = apply_povm(EnsembleState.pure(psi), C, build_efficiency_povm(DetectorModel(1.0), n, 3))
    assert q == pytest.approx(p, abs=1e-12)
    if p > 0:
        assert len(out) == 1 and out.branches[0][1].allclose(proj, atol=1e-12)


@given(states3, states3)
@settings(max_examples=60, deadline=None)
def test_fidelity_bounds(psi, phi):
    f = fidelity(psi, phi)
    assert 0.0 <= f <= 1.0
    assert fidelity(psi, psi) == pytest.approx(1.0, abs=1e-12)
