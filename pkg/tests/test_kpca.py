import numpy as np
import pytest
from hypothesis import given, strategies as st

from qadkit import kpca, qcore, reference, registry
from qadkit.errors import DegenerateError, UnsupportedError
from qadkit.validation import random_mixed_set, random_pure_set


@given(st.sampled_from([2, 3, 4, 8]), st.sampled_from([2, 4, 8]), st.integers(0, 10 ** 6))
def test_routes_match_classical_oracle(m, d, seed):
    ts = random_pure_set(m, d, np.random.default_rng(seed))
    want = reference.kpca_score_normalized(
        reference.ClassicalDataset(ts.training_vectors(), ts.test_vector()))
    assert kpca.score(ts, "inner-products").f == pytest.approx(want, abs=1e-10)
    assert kpca.score(ts, "global").f == pytest.approx(want, abs=1e-10)


def test_identical_set_scores_zero(rng):
    psi = qcore.haar_state(4, rng)
    ts = registry.training_set_from_vectors([psi] * 3, psi)
    for route in ("inner-products", "global"):
        res = kpca.score(ts, route)
        assert res.f == 0.0
        assert "z0-zero" in res.flags


def test_identical_training_orthogonal_test(rng):
    psi = qcore.haar_state(4, rng)
    ts = registry.training_set_from_vectors([psi] * 3, qcore.complete_unitary(psi)[:, 2])
    res = kpca.score(ts, "inner-products")
    assert res.f == 1.0 and "covariance-degenerate" in res.flags
    with pytest.raises(DegenerateError):
        kpca.score(ts, "global")
    fb = kpca.score(ts, "global", fallback=True)
    assert fb.f == 1.0 and "fallback" in fb.flags


def test_opposed_phases_out_of_range():
    ts = registry.training_set_from_vectors([[1, 0], [-1, 0]], [1, 0])
    res = kpca.score(ts, "inner-products")
    assert res.f == pytest.approx(-1.0, abs=1e-12)
    assert "out-of-range" in res.flags
    want = reference.kpca_score_normalized(
        reference.ClassicalDataset(ts.training_vectors(), ts.test_vector()))
    assert res.f == pytest.approx(want, abs=1e-12)


def test_near_identical_anomaly_detected():
    ts = registry.synthesize(registry.DatasetSpec(M=6, d=8, holdout=3, seed=4))
    scores = [kpca.score(p).f for _, p in ts.probes()]
    assert scores[0] > max(scores[1:])
    assert scores[0] == pytest.approx(1.0, abs=1e-3)


def test_frozen_rotation_instance():
    ts = registry.synthesize(registry.DatasetSpec(M=4, d=4, seed=7, anomaly="rotation",
                                                  anomaly_param=0.3))
    assert kpca.score(ts, "global").f == pytest.approx(0.9999897777138638, abs=1e-10)


def test_shot_mode_statistics():
    ts = random_pure_set(2, 2, np.random.default_rng(3))
    exact = kpca.score(ts).f
    a = kpca.score(ts, "inner-products", "shots", 20000, seed=1)
    assert a.stderr > 0
    assert abs(a.f - exact) < 5 * a.stderr
    assert a.shots == 3 * 2 * 20000
    b = kpca.score(ts, "inner-products", "shots", 20000, seed=1)
    assert a.f == b.f


def test_global_route_shots():
    ts = random_pure_set(3, 2, np.random.default_rng(4))
    exact = kpca.score(ts, "global").f
    res = kpca.score(ts, "global", "shots", 50000, seed=2)
    assert abs(res.f - exact) < 5 * res.stderr
    assert res.success_probs["p_chi"] == pytest.approx(
        reference.dense_quantum_oracle(ts).probs["p_chi"])


@given(st.integers(2, 5), st.integers(2, 4), st.integers(0, 10 ** 6))
def test_mixed_matches_kraus_oracle(m, d, seed):
    ts = random_mixed_set(m, d, np.random.default_rng(seed))
    assert kpca.score(ts).f == pytest.approx(reference.dense_quantum_oracle(ts).f_kpca,
                                             abs=1e-10)


def test_unitary_channels_reduce_to_pure():
    ts = random_pure_set(4, 4, np.random.default_rng(2))
    assert kpca.score(ts.as_mixed(), "mixed").f == pytest.approx(kpca.score(ts).f, abs=1e-12)


def test_mixed_anomaly_ranks_above_holdouts():
    ts = registry.synthesize(registry.DatasetSpec(M=4, d=4, kind="mixed", delta=0.1,
                                                  anomaly="depolarize", anomaly_param=0.8,
                                                  holdout=3, seed=2))
    scores = [kpca.score(p).f for _, p in ts.probes()]
    assert scores[0] > max(scores[1:])


def test_route_kind_guards():
    pure = random_pure_set(2, 2, np.random.default_rng(0))
    mixed = random_mixed_set(2, 2, np.random.default_rng(0))
    with pytest.raises(UnsupportedError):
        kpca.score(pure, "mixed")
    with pytest.raises(UnsupportedError):
        kpca.score(mixed, "global")
    with pytest.raises(ValueError):
        kpca.score(pure, "sideways")
    with pytest.raises(ValueError):
        kpca.score(pure, "inner-products", "shots", 0)
