import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qadkit import ocsvm, qcore, reference, registry, stateprep
from qadkit.errors import DegenerateError, UnsupportedError
from qadkit.validation import random_pure_set


def _set(seed, m=3, d=4):
    return random_pure_set(m, d, np.random.default_rng(seed))


def test_prepare_chi_layout():
    ts = _set(0)
    chi = stateprep.prepare_chi(ts)
    want = np.concatenate(ts.training_vectors()) / math.sqrt(ts.M)
    assert np.allclose(chi.amps, want)


def test_centroid_orthogonal_pair():
    ts = registry.training_set_from_vectors([[1, 0], [0, 1]], [1, 0])
    prep = stateprep.prepare_centroid(ts)
    assert prep.success_prob == pytest.approx(0.5)
    assert np.allclose(prep.state.amps, np.array([1, 1]) / math.sqrt(2))


def test_centroid_undefined_for_opposite_states():
    ts = registry.training_set_from_vectors([[1, 0], [-1, 0]], [0, 1])
    with pytest.raises(DegenerateError):
        stateprep.prepare_centroid(ts)


@given(st.integers(0, 10 ** 6), st.integers(2, 5))
def test_centered_state_direction(seed, m):
    ts = _set(seed, m)
    psi = ts.training_vectors()
    c = psi.mean(axis=0)
    for kappa in range(m + 1):
        v = ts.test_vector() if kappa == 0 else psi[kappa - 1]
        z = (v - c) / np.linalg.norm(v - c)
        prep = stateprep.prepare_centered(ts, kappa)
        assert abs(np.vdot(z, prep.state.amps)) == pytest.approx(1.0, abs=1e-12)


def test_centered_probabilities_closed_form():
    ts = _set(3, 4)
    c2 = np.linalg.norm(ts.training_vectors().mean(axis=0)) ** 2
    psi1 = ts.training_vectors()[0]
    z = psi1 - ts.training_vectors().mean(axis=0)
    p = stateprep.prepare_centered(ts, 1)
    assert p.stage_probs["p_label"] == pytest.approx((1 + c2) / 2, abs=1e-12)
    assert p.stage_probs["p0"] == pytest.approx(np.linalg.norm(z) ** 2 / (2 * (1 + c2)),
                                                abs=1e-12)


def test_centered_vanishing_reports_stage_probs():
    psi = np.array([1, 0, 0], dtype=complex)
    ts = registry.training_set_from_vectors([psi, psi], psi)
    with pytest.raises(DegenerateError) as exc:
        stateprep.prepare_centered(ts, 0)
    assert exc.value.details["stage_probs"]["p_label"] == pytest.approx(1.0)


def test_chi_c_covariance_matches_oracle():
    ts = _set(5, 4, 3)
    prep = stateprep.prepare_chi_c(ts)
    psi = ts.training_vectors()
    z = psi - psi.mean(axis=0)
    cov = z.T @ z.conj()
    assert np.allclose(stateprep.covariance_density(prep), cov / np.trace(cov).real, atol=1e-12)


def test_chi_c_orthogonal_pair_final_probability():
    # 1/6 rather than 1/3; label and final stage together give (1 - |c|^2)/4
    ts = registry.training_set_from_vectors([[1, 0], [0, 1]], [1, 0])
    p = stateprep.prepare_chi_c(ts)
    assert p.stage_probs["p0"] == pytest.approx(1 / 6, abs=1e-12)
    assert p.success_prob == pytest.approx(0.125, abs=1e-12)


def test_ledger_properties():
    led = stateprep.compute_ledger(_set(8, 5))
    led.check()
    assert led.trC == pytest.approx(1 / (led.Nchic2 * 4))
    assert led.undefined == ()


def test_ledger_marks_zero_vectors():
    psi = np.array([1, 0], dtype=complex)
    led = stateprep.compute_ledger(registry.training_set_from_vectors([psi, psi], psi))
    assert math.isinf(led.N02)
    assert led.undefined == (0, 1, 2)


@given(st.integers(0, 10 ** 6))
def test_ar_ai_success_probability(seed):
    ts = _set(seed, 4, 2)
    alpha = ocsvm.solve_alpha_classical(ocsvm.build_kernel(ts), 0.1)
    s = stateprep.rotation_strength(alpha.alpha, 0.1)
    assert s <= 1 + 1e-12
    for variant in "RI":
        prep = stateprep.prepare_AR_AI(alpha.alpha, variant, 2, 0.1)
        assert prep.success_prob == pytest.approx(s * s, abs=1e-12)


def test_ar_ai_branch_contents():
    alpha = np.array([0.2, 0.3])
    prep = stateprep.prepare_AR_AI(alpha, "I", 2, 0.1)
    v = prep.state.amps.reshape(2, 2, 2, 2)
    ahat = alpha / np.linalg.norm(alpha)
    assert np.allclose(v[0, 0, :, 0], [1 / math.sqrt(2), 0])
    assert np.allclose(v[1, 0, :, 0], 1j * ahat / math.sqrt(2))


def test_mixed_sets_unsupported():
    ts = registry.synthesize(registry.DatasetSpec(kind="mixed", anomaly="none"))
    with pytest.raises(UnsupportedError):
        stateprep.prepare_chi(ts)


def test_stage_probabilities_match_oracle_frozen():
    ts = registry.synthesize(registry.DatasetSpec(M=4, d=4, seed=7, anomaly="rotation",
                                                  anomaly_param=0.3))
    assert stateprep.prepare_chi_c(ts).stage_probs["p0"] == pytest.approx(
        0.002417856091900805, abs=1e-12)
    assert stateprep.centroid_probability(ts) == pytest.approx(
        reference.dense_quantum_oracle(ts).probs["p_chi"], abs=1e-12)
