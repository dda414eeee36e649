import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qadkit import qcore, registry
from qadkit.errors import DimensionError, SchemaError, UnsupportedError


def test_synthesize_deterministic():
    spec = registry.DatasetSpec(M=5, d=6, seed=11, holdout=3)
    assert registry.dumps(registry.synthesize(spec)) == registry.dumps(registry.synthesize(spec))


@given(st.integers(2, 8), st.sampled_from([4, 8]), st.floats(0.0, 0.3), st.integers(0, 999))
def test_pairwise_fidelity_bound(m, d, delta, seed):
    ts = registry.synthesize(registry.DatasetSpec(M=m, d=d, delta=delta, seed=seed))
    v = ts.training_vectors()
    fid = np.abs(v.conj() @ v.T) ** 2
    assert fid.min() >= (1 - 2 * delta ** 2) ** 2 - 1e-12


def test_delta_zero_gives_identical_states():
    ts = registry.synthesize(registry.DatasetSpec(M=4, d=4, delta=0.0, anomaly="none"))
    v = ts.training_vectors()
    assert np.allclose(v, v[0])


def test_orthogonal_anomaly_is_orthogonal_to_training():
    ts = registry.synthesize(registry.DatasetSpec(M=6, d=8, seed=3))
    assert np.max(np.abs(ts.training_vectors().conj() @ ts.test_vector())) < 1e-12


def test_rotation_anomaly_overlap():
    theta = 0.4
    ts = registry.synthesize(registry.DatasetSpec(M=3, d=4, delta=0.0, anomaly="rotation",
                                                  anomaly_param=theta))
    assert abs(np.vdot(ts.training_vectors()[0], ts.test_vector())) == \
        pytest.approx(np.cos(theta))


def test_holdouts_present():
    ts = registry.synthesize(registry.DatasetSpec(holdout=4))
    assert [sid for sid, _ in ts.probes()] == ["test"] + [f"holdout-{k}" for k in range(4)]


def test_mixed_synthesis_channels_complete():
    ts = registry.synthesize(registry.DatasetSpec(M=3, d=2, kind="mixed", delta=0.2,
                                                  perturbation_rank=1, anomaly="depolarize",
                                                  anomaly_param=0.5))
    assert ts.kind == "mixed"
    for s in ts.sources + (ts.test,):
        qcore.check_completeness(s.kraus)
    assert len({len(s.kraus) for s in ts.sources + (ts.test,)}) == 1


@pytest.mark.parametrize("kw", [dict(M=1), dict(delta=1.5), dict(anomaly="spooky"),
                                dict(kind="pure", anomaly="depolarize"),
                                dict(d=2, perturbation_rank=1, anomaly="orthogonal"),
                                dict(base="explicit")])
def test_invalid_specs(kw):
    with pytest.raises(SchemaError):
        registry.synthesize(registry.DatasetSpec(**kw))


def test_round_trip_byte_identical(tmp_path):
    ts = registry.synthesize(registry.DatasetSpec(M=8, d=16, seed=2, holdout=2))
    path = tmp_path / "d.json"
    registry.save(ts, path)
    back = registry.load(path)
    assert registry.dumps(back) == path.read_text()
    assert np.array_equal(back.training_vectors(), ts.training_vectors())


def test_round_trip_mixed():
    ts = registry.synthesize(registry.DatasetSpec(M=3, d=4, kind="mixed"))
    text = registry.dumps(ts)
    assert registry.dumps(registry.loads(text)) == text


def test_load_rejects_unknown_field():
    doc = json.loads(registry.dumps(registry.synthesize(registry.DatasetSpec())))
    doc["extra"] = 1
    with pytest.raises(SchemaError) as exc:
        registry.loads(json.dumps(doc))
    assert "$" in str(exc.value) or "extra" in str(exc.value)


def test_load_reports_field_path():
    doc = json.loads(registry.dumps(registry.synthesize(registry.DatasetSpec())))
    doc["training"][1]["amplitudes"] = doc["training"][1]["amplitudes"][:-1] \
        if "amplitudes" in doc["training"][1] else None
    with pytest.raises(SchemaError) as exc:
        registry.loads(json.dumps(doc))
    assert "training[1]" in str(exc.value)


def test_load_rejects_bad_json():
    with pytest.raises(SchemaError):
        registry.loads("{not json")


def test_training_set_needs_two_states(rng):
    with pytest.raises(DimensionError):
        registry.training_set_from_vectors([qcore.haar_state(2, rng)], qcore.haar_state(2, rng))


def test_mixed_dimension_mismatch(rng):
    with pytest.raises(DimensionError):
        registry.training_set_from_vectors([qcore.haar_state(2, rng), qcore.haar_state(3, rng)],
                                           qcore.haar_state(2, rng))


def test_controlled_source_needs_pure():
    ts = registry.synthesize(registry.DatasetSpec(kind="mixed", anomaly="none"))
    with pytest.raises(UnsupportedError):
        registry.controlled_source(ts)


def test_controlled_source_prepares_states():
    ts = registry.synthesize(registry.DatasetSpec(M=4, d=4, seed=5))
    uc = registry.controlled_source(ts)
    for j in range(4):
        v = uc @ np.kron(qcore.ket(j, 4), qcore.ket(0, 4))
        assert np.allclose(v, np.kron(qcore.ket(j, 4), ts.training_vectors()[j]))


def test_as_mixed_realizes_same_density():
    ts = registry.synthesize(registry.DatasetSpec(M=3, d=4, seed=1))
    mx = ts.as_mixed()
    for a, b in zip(ts.sources, mx.sources):
        assert np.allclose(registry.realized_matrix(a), registry.realized_matrix(b))
