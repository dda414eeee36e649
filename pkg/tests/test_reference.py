import numpy as np
import pytest
from hypothesis import given, strategies as st

from qadkit import qcore, reference, registry
from qadkit.validation import random_pure_set


def test_classical_identical_gives_zero(rng):
    x = qcore.haar_state(4, rng)
    ds = reference.ClassicalDataset(np.array([x] * 3), x)
    assert reference.kpca_score_normalized(ds) == 0.0


def test_classical_orthogonal_test_gives_one():
    train = np.array([[1, 0, 0], [np.sqrt(0.99), 0.1, 0]], dtype=complex)
    ds = reference.ClassicalDataset(train, np.array([0, 0, 1.0]))
    assert reference.kpca_score_normalized(ds) == pytest.approx(1.0, abs=1e-12)


def test_classical_score_hand_case():
    # train {e1, -e1}: centroid 0, C = 2 e1 e1^T, z0 = x0
    train = np.array([[1.0, 0.0], [-1.0, 0.0]])
    ds = reference.ClassicalDataset(train, np.array([0.6, 0.8]))
    assert reference.kpca_score_classical(ds) == pytest.approx(1 - 2 * 0.36)


def test_restricted_svm_matches_kernel_identity():
    k = np.eye(3)
    a = reference.svm_solve_restricted(k, 0.1)
    assert np.allclose(a, np.ones(3) / 1.3)


def test_full_svm_linear_constraint(rng):
    x = np.array([qcore.haar_state(3, rng).real for _ in range(4)])
    k = x @ x.T
    r, alpha = reference.svm_solve_full(k, 0.2)
    assert alpha.sum() == pytest.approx(1.0)
    assert np.allclose(k @ alpha + 0.2 * 4 * alpha, r * np.ones(4))
    # same direction as the restricted solve
    a2 = reference.svm_solve_restricted(k, 0.2)
    assert np.allclose(alpha / alpha.sum(), a2 / a2.sum())


def test_svm_score_kernel_form(rng):
    x = np.array([rng.normal(size=3) for _ in range(4)])
    x0 = rng.normal(size=3)
    alpha = rng.normal(size=4)
    ds = reference.ClassicalDataset(x, x0)
    assert reference.svm_score_classical(ds, alpha) == pytest.approx(abs(alpha @ (x @ x0) - 1),
                                                                     abs=1e-12)


def test_svm_score_trivial():
    ds = reference.ClassicalDataset(np.eye(2), np.array([1.0, 0.0]))
    assert reference.svm_score_classical(ds, np.zeros(2)) == 1.0


def test_oracle_identical_set():
    psi = np.array([1, 1j]) / np.sqrt(2)
    ts = registry.training_set_from_vectors([psi, psi], psi)
    r = reference.dense_quantum_oracle(ts, 0.1)
    assert r.f_kpca == 0.0
    assert r.f_svm == pytest.approx(0.1 / 1.1, abs=1e-12)


def test_oracle_orthogonal_pair():
    ts = registry.training_set_from_vectors([[1, 0], [0, 1]], [1, 0])
    r = reference.dense_quantum_oracle(ts)
    assert r.probs["p_chi"] == pytest.approx(0.5)
    # the label stage and final stage of the covariance preparation
    assert r.probs["p_label_C"] == pytest.approx(0.75)
    assert r.probs["p0_C"] == pytest.approx(1 / 6)


def test_oracle_frozen_instance():
    ts = registry.synthesize(registry.DatasetSpec(M=4, d=4, seed=7, anomaly="rotation",
                                                  anomaly_param=0.3))
    r = reference.dense_quantum_oracle(ts)
    assert r.f_kpca == pytest.approx(0.9999897777138638, abs=1e-10)
    assert r.f_svm == pytest.approx(0.16408825993305798, abs=1e-10)
    assert r.probs["p_chi"] == pytest.approx(0.9903751187877425, abs=1e-12)


def test_oracle_mixed_frozen_instance():
    ts = registry.synthesize(registry.DatasetSpec(M=3, d=2, kind="mixed", delta=0.2,
                                                  perturbation_rank=1, anomaly="depolarize",
                                                  anomaly_param=0.5, seed=1))
    r = reference.dense_quantum_oracle(ts)
    assert r.f_kpca == pytest.approx(0.9979863921360953, abs=1e-10)
    assert r.f_svm == pytest.approx(0.02693426811893912, abs=1e-10)


def test_oracle_unitary_channel_matches_pure():
    ts = random_pure_set(3, 4, np.random.default_rng(9))
    a, b = reference.dense_quantum_oracle(ts), reference.dense_quantum_oracle(ts.as_mixed())
    assert a.f_kpca == pytest.approx(b.f_kpca, abs=1e-12)
    assert np.allclose(a.kernel, b.kernel, atol=1e-12)


@given(st.integers(2, 6), st.sampled_from([2, 3, 4]), st.integers(0, 10 ** 6))
def test_gram_form_equals_classical_normalized(m, d, seed):
    ts = random_pure_set(m, d, np.random.default_rng(seed))
    r = reference.dense_quantum_oracle(ts)
    assert r.f_kpca == pytest.approx(r.extra["f_classical"], abs=1e-10)


@given(st.integers(2, 6), st.integers(0, 10 ** 6))
def test_ledger_identities(m, seed):
    ts = random_pure_set(m, 3, np.random.default_rng(seed))
    led = reference.dense_quantum_oracle(ts).ledger
    zs = led["z_sqnorms"]
    assert led["centroid_sqnorm"] == pytest.approx(
        np.sum(reference.dense_quantum_oracle(ts).gram[1:, 1:]).real / m ** 2)
    # sum_i |z_i|^2 = M (1 - |c|^2) for unit vectors
    assert sum(zs) == pytest.approx(m * (1 - led["centroid_sqnorm"]), abs=1e-12)
