import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qadkit import qcore, registry, swaptest
from qadkit.errors import DimensionError, UnsupportedError


def _pair(seed, d=3):
    rng = np.random.default_rng(seed)
    a, b = qcore.haar_state(d, rng), qcore.haar_state(d, rng)
    return a, b, registry.StateSource.from_amplitudes(a), registry.StateSource.from_amplitudes(b)


@given(st.integers(0, 10 ** 6), st.floats(0, 2 * math.pi))
def test_modified_swap_probability_formula(seed, phase):
    a, b, _, _ = _pair(seed)
    zeta = np.exp(1j * phase)
    want = 0.5 * (1 - (zeta * np.vdot(a, b)).real)
    assert swaptest.modified_swap_probability(a, b, zeta) == pytest.approx(want, abs=1e-12)


@given(st.integers(0, 10 ** 6))
def test_complex_overlap_exact(seed):
    a, b, sa, sb = _pair(seed)
    est = swaptest.complex_overlap(sa, sb)
    assert abs(est.value - np.vdot(a, b)) < 1e-12


def test_identical_and_orthogonal_limits():
    e0 = registry.StateSource.from_amplitudes([1, 0])
    e1 = registry.StateSource.from_amplitudes([0, 1])
    assert swaptest.modified_swap_test(e0, e0).probs["re"] == pytest.approx(0.0, abs=1e-15)
    assert swaptest.modified_swap_test(e0, e1).probs["re"] == pytest.approx(0.5)


def test_zeta_must_have_unit_modulus():
    _, _, sa, sb = _pair(0)
    with pytest.raises(ValueError):
        swaptest.modified_swap_test(sa, sb, zeta=0.5)


def test_shot_mode_deterministic():
    _, _, sa, sb = _pair(1)
    a = swaptest.complex_overlap(sa, sb, "shots", 500, seed=3)
    b = swaptest.complex_overlap(sa, sb, "shots", 500, seed=3)
    assert a.value == b.value
    assert a.total_shots == 1000


def test_shots_required():
    _, _, sa, sb = _pair(1)
    with pytest.raises(ValueError):
        swaptest.modified_swap_test(sa, sb, 1, "shots", None)


@given(st.integers(0, 10 ** 6))
def test_standard_swap_pure_and_mixed(seed):
    rng = np.random.default_rng(seed)
    a, b = qcore.haar_state(3, rng), qcore.haar_state(3, rng)
    assert swaptest.standard_swap_test(a, b).value == pytest.approx(abs(np.vdot(a, b)) ** 2,
                                                                    abs=1e-12)
    ra, rb = qcore.random_density(3, rng), qcore.random_density(3, rng)
    assert swaptest.standard_swap_test(ra, rb).value == pytest.approx(
        np.trace(ra @ rb).real, abs=1e-12)
    assert swaptest.standard_swap_test(a, rb).value == pytest.approx(
        np.vdot(a, rb @ a).real, abs=1e-12)


def test_standard_swap_identical_passes():
    e = qcore.ket(1, 4)
    assert swaptest.standard_swap_test(e, e).probs["pass"] == pytest.approx(1.0)


def test_standard_swap_dimension_mismatch():
    with pytest.raises(DimensionError):
        swaptest.standard_swap_test(qcore.ket(0, 2), qcore.ket(0, 3))


def _channels(seed, d=3, n=2):
    rng = np.random.default_rng(seed)
    return (registry.StateSource.from_kraus(qcore.random_kraus(d, n, rng)),
            registry.StateSource.from_kraus(qcore.random_kraus(d, n, rng)))


@given(st.integers(0, 10 ** 6))
def test_kraus_inner_product_exact(seed):
    a, b = _channels(seed)
    want = sum(np.vdot(ea[:, 0], eb[:, 0]) for ea, eb in zip(a.channel.ops, b.channel.ops))
    assert abs(swaptest.kraus_inner_product(a, b).value - want) < 1e-12


def test_kraus_inner_product_unitary_reduces_to_overlap():
    a, b, sa, sb = _pair(4)
    est = swaptest.kraus_inner_product(sa.as_mixed(), sb.as_mixed())
    assert abs(est.value - np.vdot(a, b)) < 1e-12


def test_printed_im_gate_reads_real_part():
    a, b = _channels(6)
    p_printed = swaptest.kraus_ancilla_probability(a.channel, b.channel, swaptest.IM_GATE_PRINTED)
    p_h = swaptest.kraus_ancilla_probability(a.channel, b.channel, qcore.HADAMARD)
    assert p_printed == pytest.approx(p_h, abs=1e-12)


def test_im_gate_probability():
    a, b = _channels(7)
    w = swaptest.kraus_inner_product(a, b).value
    p = swaptest.kraus_ancilla_probability(a.channel, b.channel, swaptest.IM_GATE)
    assert p == pytest.approx(0.5 * (1 + w.imag), abs=1e-12)


def test_kraus_count_mismatch():
    a, _ = _channels(0, n=2)
    b, _ = _channels(1, n=3)
    with pytest.raises(DimensionError):
        swaptest.kraus_inner_product(a, b)


def test_kind_guards():
    _, _, sa, sb = _pair(0)
    a, b = _channels(0)
    with pytest.raises(UnsupportedError):
        swaptest.kraus_inner_product(sa, sb)
    with pytest.raises(UnsupportedError):
        swaptest.modified_swap_test(a, b)


def test_interferometer_completeness():
    a, b = _channels(2)
    qcore.check_completeness(swaptest.interferometer_kraus(a.channel, b.channel))
