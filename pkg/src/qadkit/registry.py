"""Quantum data model: state sources, training sets, synthesis and file I/O.

A pure source is a unitary U with U|0> = |psi>; a mixed source is a Kraus
list E_l with rho = sum_l E_l |0><0| E_l^dag. Mixed sets keep the Kraus
lists themselves because the mixed-state inner product depends on them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import qcore
from .errors import DimensionError, InvariantError, QadError, SchemaError, UnsupportedError

FORMAT_VERSION = 1
KINDS = ("pure", "mixed")


@dataclass(frozen=True, eq=False)
class StateSource:
    kind: str
    unitary: qcore.Unitary | None = None
    channel: qcore.KrausChannel | None = None

    def __post_init__(self):
        if self.kind == "pure":
            if self.unitary is None or self.channel is not None:
                raise ValueError("pure source needs exactly a unitary")
            if not isinstance(self.unitary, qcore.Unitary):
                object.__setattr__(self, "unitary", qcore.Unitary(self.unitary))
        elif self.kind == "mixed":
            if self.channel is None or self.unitary is not None:
                raise ValueError("mixed source needs exactly a Kraus channel")
            if not isinstance(self.channel, qcore.KrausChannel):
                object.__setattr__(self, "channel", qcore.KrausChannel(tuple(self.channel)))
        else:
            raise ValueError(f"unknown source kind {self.kind!r}")

    @classmethod
    def from_unitary(cls, u) -> "StateSource":
        return cls("pure", unitary=qcore.Unitary(u))

    @classmethod
    def from_amplitudes(cls, amps) -> "StateSource":
        """Pure source whose unitary is the deterministic completion of ``amps``."""
        state = qcore.PureState(amps)
        return cls.from_unitary(qcore.complete_unitary(state.amps))

    @classmethod
    def from_kraus(cls, ops) -> "StateSource":
        return cls("mixed", channel=qcore.KrausChannel(tuple(ops)))

    @property
    def dim(self) -> int:
        return self.unitary.dim if self.kind == "pure" else self.channel.dim

    @property
    def kraus(self) -> tuple:
        """Kraus view of either kind; a unitary is the one-operator channel."""
        if self.kind == "pure":
            return (self.unitary.mat,)
        return self.channel.ops

    def as_mixed(self) -> "StateSource":
        return self if self.kind == "mixed" else StateSource.from_kraus(self.kraus)


def realize(src: StateSource):
    if src.kind == "pure":
        return qcore.PureState(src.unitary.mat[:, 0])
    d = src.dim
    rho = sum(np.outer(e[:, 0], e[:, 0].conj()) for e in src.channel.ops)
    return qcore.DensityMatrix(rho)


def realized_matrix(src: StateSource) -> np.ndarray:
    """Density matrix of either kind of source."""
    out = realize(src)
    return out.density().mat if isinstance(out, qcore.PureState) else out.mat


@dataclass(frozen=True, eq=False)
class TrainingSet:
    """M training sources plus the test source (index 0 in formulas).

    ``holdout`` carries extra probe states (e.g. held-out normals) scored
    with the same trained model.
    """

    sources: tuple
    test: StateSource
    holdout: tuple = ()

    def __post_init__(self):
        sources = tuple(self.sources)
        holdout = tuple(self.holdout)
        allsrc = sources + (self.test,) + holdout
        if len(sources) < 2:
            raise DimensionError(f"training set needs M >= 2 states, got {len(sources)}",
                                 module="registry", operation="TrainingSet",
                                 precondition="M >= 2")
        kinds = {s.kind for s in allsrc}
        if len(kinds) != 1:
            raise DimensionError("training, test and holdout sources must share one kind",
                                 module="registry", operation="TrainingSet")
        dims = {s.dim for s in allsrc}
        if len(dims) != 1:
            raise DimensionError(f"sources disagree on dimension: {sorted(dims)}",
                                 module="registry", operation="TrainingSet")
        if kinds == {"mixed"}:
            n = max(len(s.channel) for s in allsrc)
            pad = lambda s: s if len(s.channel) == n else StateSource("mixed", channel=s.channel.padded(n))
            sources = tuple(pad(s) for s in sources)
            object.__setattr__(self, "test", pad(self.test))
            holdout = tuple(pad(s) for s in holdout)
        object.__setattr__(self, "sources", sources)
        object.__setattr__(self, "holdout", holdout)

    @property
    def M(self) -> int:
        return len(self.sources)

    @property
    def dim(self) -> int:
        return self.test.dim

    @property
    def kind(self) -> str:
        return self.test.kind

    @property
    def n_kraus(self) -> int:
        return len(self.test.kraus)

    def with_test(self, src: StateSource) -> "TrainingSet":
        return replace(self, test=src)

    def probes(self) -> list:
        """(state id, training set with that probe as test) for test and holdouts."""
        out = [("test", self)]
        out += [(f"holdout-{k}", self.with_test(s)) for k, s in enumerate(self.holdout)]
        return out

    def training_vectors(self) -> np.ndarray:
        """Rows are |psi_i>, i = 1..M (pure sets only)."""
        require_pure(self, "training_vectors")
        return np.array([s.unitary.mat[:, 0] for s in self.sources])

    def test_vector(self) -> np.ndarray:
        require_pure(self, "test_vector")
        return self.test.unitary.mat[:, 0].copy()

    def as_mixed(self) -> "TrainingSet":
        return TrainingSet(tuple(s.as_mixed() for s in self.sources), self.test.as_mixed(),
                           tuple(s.as_mixed() for s in self.holdout))


def require_pure(ts: TrainingSet, operation: str, module: str = "registry"):
    if ts.kind != "pure":
        raise UnsupportedError(f"{operation} needs a pure training set (controlled "
                               "source access U_C only exists for pure states)",
                               module=module, operation=operation,
                               precondition="pure-kind training set")


def require_mixed(ts: TrainingSet, operation: str, module: str = "registry"):
    if ts.kind != "mixed":
        raise UnsupportedError(f"{operation} needs a mixed training set",
                               module=module, operation=operation,
                               precondition="mixed-kind training set")


def controlled_source(ts: TrainingSet) -> np.ndarray:
    """U_C = sum_i |i><i| (x) U_i on (control (x) data)."""
    require_pure(ts, "controlled_source")
    return qcore.controlled([s.unitary.mat for s in ts.sources])


def training_set_from_vectors(train, test, holdout=()) -> TrainingSet:
    return TrainingSet(tuple(StateSource.from_amplitudes(v) for v in train),
                       StateSource.from_amplitudes(test),
                       tuple(StateSource.from_amplitudes(v) for v in holdout))


def training_set_from_kraus(train, test, holdout=()) -> TrainingSet:
    return TrainingSet(tuple(StateSource.from_kraus(k) for k in train),
                       StateSource.from_kraus(test),
                       tuple(StateSource.from_kraus(k) for k in holdout))


# -- synthesis ----------------------------------------------------------------

BASE_RECIPES = ("basis", "haar", "explicit")
ANOMALY_RECIPES = ("none", "rotation", "orthogonal", "depolarize")


@dataclass(frozen=True)
class DatasetSpec:
    """Recipe for a synthetic near-identical training set with an anomaly.

    Training states are sqrt(1-delta^2)|base> + delta|eta_i> with eta_i
    Haar-random in a ``perturbation_rank``-dimensional subspace orthogonal
    to the base, so pairwise fidelity is at least (1 - 2 delta^2)^2.
    Held-out normals are drawn the same way. Anomaly recipes:

    * ``rotation``   cos(theta)|base> + sin(theta)|u>, u orthogonal to base
      and to the perturbation subspace (``anomaly_param`` = theta)
    * ``orthogonal`` Haar-random state orthogonal to base and perturbations
    * ``depolarize`` (mixed only) a normal state under extra depolarizing
      noise ``anomaly_param``
    * ``none``       the test state is another normal draw

    Mixed sets apply a depolarizing channel of strength ``noise`` after each
    state's unitary.
    """

    M: int = 4
    d: int = 4
    kind: str = "pure"
    base: str = "basis"
    delta: float = 0.1
    anomaly: str = "orthogonal"
    anomaly_param: float = 0.0
    seed: int = 0
    holdout: int = 0
    perturbation_rank: int = 2
    noise: float = 0.1
    base_index: int = 0
    base_amps: tuple | None = None

    def validate(self):
        err = lambda msg: SchemaError(msg, module="registry", operation="synthesize",
                                      precondition=msg)
        if self.M < 2:
            raise err("M must be >= 2")
        if self.d < 1:
            raise err("d must be >= 1")
        if self.kind not in KINDS:
            raise err(f"kind must be one of {KINDS}")
        if self.base not in BASE_RECIPES:
            raise err(f"base must be one of {BASE_RECIPES}")
        if not 0.0 <= self.delta <= 1.0:
            raise err("delta must lie in [0, 1]")
        if self.anomaly not in ANOMALY_RECIPES:
            raise err(f"anomaly must be one of {ANOMALY_RECIPES}")
        if self.anomaly == "depolarize" and self.kind != "mixed":
            raise err("depolarize anomaly needs kind 'mixed'")
        if self.kind == "mixed" and not 0.0 <= self.noise <= 1.0:
            raise err("noise must lie in [0, 1]")
        if self.anomaly == "depolarize" and not 0.0 <= self.anomaly_param <= 1.0:
            raise err("depolarize strength must lie in [0, 1]")
        if self.holdout < 0:
            raise err("holdout must be >= 0")
        r = self.perturbation_rank
        if self.delta > 0 and not 1 <= r <= self.d - 1:
            raise err(f"perturbation_rank must lie in [1, d-1] when delta > 0 (d={self.d})")
        if self.anomaly in ("rotation", "orthogonal"):
            used = 1 + (r if self.delta > 0 else 0)
            if self.d - used < 1:
                raise err(f"{self.anomaly} anomaly infeasible: d={self.d} leaves no direction "
                          "orthogonal to the base and perturbation subspace")
        if self.base == "explicit":
            if self.base_amps is None or len(self.base_amps) != self.d:
                raise err("explicit base needs base_amps of length d")
        if self.base == "basis" and not 0 <= self.base_index < self.d:
            raise err("base_index out of range")


def _frame(spec: DatasetSpec, rng: np.random.Generator) -> np.ndarray:
    """Orthonormal columns: base, perturbation directions, then the rest."""
    d = spec.d
    if spec.base == "basis":
        base = qcore.ket(spec.base_index, d)
    elif spec.base == "haar":
        base = qcore.haar_state(d, rng)
    else:
        amps = np.array([complex(*a) if isinstance(a, (list, tuple)) else complex(a)
                         for a in spec.base_amps])
        base = qcore.PureState(amps).amps.copy()
    # QR of [base, random columns]: column 0 is base up to phase, the rest span its complement
    q, _ = np.linalg.qr(np.column_stack([base, qcore.haar_unitary(d, rng)]))
    return np.column_stack([base, q[:, 1:d]])


def _normal_state(frame: np.ndarray, spec: DatasetSpec, rng: np.random.Generator) -> np.ndarray:
    base = frame[:, 0]
    if spec.delta == 0:
        return base.copy()
    r = spec.perturbation_rank
    eta = frame[:, 1:1 + r] @ qcore.haar_state(r, rng)
    return math.sqrt(1 - spec.delta ** 2) * base + spec.delta * eta


def _outside_direction(frame: np.ndarray, spec: DatasetSpec, rng: np.random.Generator):
    used = 1 + (spec.perturbation_rank if spec.delta > 0 else 0)
    free = frame[:, used:]
    return free @ qcore.haar_state(free.shape[1], rng)


def synthesize(spec: DatasetSpec) -> TrainingSet:
    spec.validate()
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    frame = _frame(spec, rng)
    train = [_normal_state(frame, spec, rng) for _ in range(spec.M)]
    extra = [_normal_state(frame, spec, rng) for _ in range(spec.holdout)]
    test_noise = spec.noise
    if spec.anomaly == "rotation":
        u = _outside_direction(frame, spec, rng)
        th = spec.anomaly_param
        test = math.cos(th) * frame[:, 0] + math.sin(th) * u
    elif spec.anomaly == "orthogonal":
        test = _outside_direction(frame, spec, rng)
    else:
        test = _normal_state(frame, spec, rng)
        if spec.anomaly == "depolarize":
            test_noise = 1 - (1 - spec.noise) * (1 - spec.anomaly_param)

    norm = lambda v: v / np.linalg.norm(v)
    train = [norm(v) for v in train]
    extra = [norm(v) for v in extra]
    test = norm(test)
    if spec.kind == "pure":
        return training_set_from_vectors(train, test, extra)

    def noisy(v, q):
        u = qcore.complete_unitary(v)
        return [k @ u for k in qcore.depolarizing_kraus(spec.d, q)]

    return training_set_from_kraus([noisy(v, spec.noise) for v in train],
                                   noisy(test, test_noise),
                                   [noisy(v, spec.noise) for v in extra])


# -- file format --------------------------------------------------------------

def _num(x: float) -> str:
    x = float(x)
    if x == 0:
        return "0.0" if math.copysign(1, x) > 0 else "-0.0"
    return format(x, ".17g")


def _dump(obj, indent=0) -> str:
    pad = " " * indent
    if isinstance(obj, dict):
        items = [f'{pad}  {json.dumps(k)}: {_dump(v, indent + 2).lstrip()}' for k, v in obj.items()]
        return pad + "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, list):
        if obj and all(isinstance(v, (int, float, complex)) and not isinstance(v, bool) for v in obj):
            return pad + "[" + ", ".join(_scalar(v) for v in obj) + "]"
        if obj and all(isinstance(v, list) and all(isinstance(x, float) for x in v) for v in obj):
            return pad + "[" + ", ".join(_dump(v).strip() for v in obj) + "]"
        inner = [_dump(v, indent + 2) for v in obj]
        return pad + "[\n" + ",\n".join(inner) + "\n" + pad + "]"
    return pad + _scalar(obj)


def _scalar(v) -> str:
    if isinstance(v, bool) or v is None or isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, int):
        return str(v)
    return _num(v)


def _complex_list(vec) -> list:
    return [[float(z.real), float(z.imag)] for z in np.asarray(vec).reshape(-1)]


def _record(src: StateSource) -> dict:
    if src.kind == "pure":
        return {"amps": _complex_list(src.unitary.mat[:, 0])}
    return {"kraus": [[_complex_list(row) for row in op] for op in src.channel.ops]}


def dumps(ts: TrainingSet) -> str:
    doc = {
        "version": FORMAT_VERSION,
        "kind": ts.kind,
        "dim": ts.dim,
        "training": [_record(s) for s in ts.sources],
        "test": _record(ts.test),
    }
    if ts.holdout:
        doc["holdout"] = [_record(s) for s in ts.holdout]
    return _dump(doc) + "\n"


def save(ts: TrainingSet, path) -> None:
    Path(path).write_text(dumps(ts))


def _schema(msg: str, where: str) -> SchemaError:
    return SchemaError(f"{where}: {msg}", module="registry", operation="load",
                       precondition=msg, field=where)


def _parse_complex(value, where: str) -> complex:
    if (not isinstance(value, list) or len(value) != 2
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in value)):
        raise _schema("expected [re, im] number pair", where)
    return complex(float(value[0]), float(value[1]))


def _parse_record(rec, kind: str, dim: int, where: str) -> StateSource:
    if not isinstance(rec, dict):
        raise _schema("state record must be an object", where)
    if kind == "pure":
        if set(rec) != {"amps"}:
            raise _schema("pure record needs exactly the field 'amps'", where)
        amps = rec["amps"]
        if not isinstance(amps, list) or len(amps) != dim:
            raise _schema(f"'amps' must list {dim} amplitudes", where + ".amps")
        vec = np.array([_parse_complex(a, f"{where}.amps[{j}]") for j, a in enumerate(amps)])
        norm = float(np.vdot(vec, vec).real)
        if abs(norm - 1) > qcore.EXACT_TOL:
            raise _schema(f"amplitudes have norm^2 {norm!r}, expected 1", where + ".amps")
        return StateSource.from_amplitudes(vec)
    if set(rec) != {"kraus"}:
        raise _schema("mixed record needs exactly the field 'kraus'", where)
    ops = rec["kraus"]
    if not isinstance(ops, list) or not ops:
        raise _schema("'kraus' must be a non-empty list of matrices", where + ".kraus")
    mats = []
    for l, op in enumerate(ops):
        w = f"{where}.kraus[{l}]"
        if not isinstance(op, list) or len(op) != dim or any(
                not isinstance(row, list) or len(row) != dim for row in op):
            raise _schema(f"Kraus operator must be a {dim}x{dim} row-major matrix", w)
        mats.append(np.array([[_parse_complex(z, f"{w}[{r}][{c}]") for c, z in enumerate(row)]
                              for r, row in enumerate(op)]))
    try:
        return StateSource.from_kraus(mats)
    except InvariantError as exc:
        raise _schema(exc.message, where + ".kraus") from None


def loads(text: str) -> TrainingSet:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}",
                          module="registry", operation="load", line=exc.lineno) from None
    if not isinstance(doc, dict):
        raise _schema("top level must be an object", "$")
    allowed = {"version", "kind", "dim", "training", "test", "holdout"}
    unknown = set(doc) - allowed
    if unknown:
        raise _schema(f"unknown fields {sorted(unknown)}", "$")
    for key in ("version", "kind", "dim", "training", "test"):
        if key not in doc:
            raise _schema("missing required field", key)
    if doc["version"] != FORMAT_VERSION:
        raise _schema(f"unsupported version {doc['version']!r}", "version")
    kind = doc["kind"]
    if kind not in KINDS:
        raise _schema(f"kind must be one of {KINDS}", "kind")
    dim = doc["dim"]
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise _schema("dim must be a positive integer", "dim")
    training = doc["training"]
    if not isinstance(training, list) or len(training) < 2:
        raise _schema("training must list at least 2 states", "training")
    train = tuple(_parse_record(r, kind, dim, f"training[{i}]") for i, r in enumerate(training))
    test = _parse_record(doc["test"], kind, dim, "test")
    holdout = doc.get("holdout", [])
    if not isinstance(holdout, list):
        raise _schema("holdout must be a list", "holdout")
    extra = tuple(_parse_record(r, kind, dim, f"holdout[{i}]") for i, r in enumerate(holdout))
    return TrainingSet(train, test, extra)


def load(path) -> TrainingSet:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read dataset {path}: {exc}", module="registry",
                          operation="load") from None
    return loads(text)
