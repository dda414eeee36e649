"""Dense statevector / density-matrix primitives.

Registers are ordered most-significant first: in ``tensor(a, b)`` the index
of ``a`` is the high digit. Functions accept plain numpy arrays or the typed
wrappers below (anything ``np.asarray`` understands).
"""

from __future__ import annotations

import math
import string
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .errors import DimensionError, InvariantError, MeasurementImpossible

EXACT_TOL = 1e-12
PSD_TOL = 1e-10
MEASURE_FLOOR = 1e-14


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PureState:
    amps: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amps)
        if amps.ndim != 1 or amps.size < 1:
            raise DimensionError("amplitudes must be a non-empty vector",
                                 module="qcore", operation="PureState")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > EXACT_TOL:
            raise InvariantError(f"state norm^2 {norm!r} differs from 1",
                                 module="qcore", operation="PureState",
                                 precondition="sum |amps|^2 = 1 within 1e-12")
        object.__setattr__(self, "amps", amps)

    @property
    def dim(self) -> int:
        return self.amps.size

    def __array__(self, dtype=None, copy=None):
        return self.amps if dtype is None else self.amps.astype(dtype)

    def density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amps, self.amps.conj()))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    mat: np.ndarray

    def __post_init__(self):
        mat = _frozen(self.mat)
        check_density(mat, operation="DensityMatrix")
        object.__setattr__(self, "mat", mat)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.mat if dtype is None else self.mat.astype(dtype)


@dataclass(frozen=True, eq=False)
class Unitary:
    mat: np.ndarray

    def __post_init__(self):
        mat = _frozen(self.mat)
        check_unitary(mat, operation="Unitary")
        object.__setattr__(self, "mat", mat)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.mat if dtype is None else self.mat.astype(dtype)


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """Ordered Kraus operators E_l with sum_l E_l^dag E_l = 1."""

    ops: tuple

    def __post_init__(self):
        ops = tuple(_frozen(op) for op in self.ops)
        if not ops:
            raise DimensionError("channel needs at least one Kraus operator",
                                 module="qcore", operation="KrausChannel")
        shape = ops[0].shape
        if len(shape) != 2 or shape[0] != shape[1] or any(op.shape != shape for op in ops):
            raise DimensionError("Kraus operators must be square and equal-sized",
                                 module="qcore", operation="KrausChannel")
        check_completeness(ops, operation="KrausChannel")
        object.__setattr__(self, "ops", ops)

    @property
    def dim(self) -> int:
        return self.ops[0].shape[0]

    def __len__(self):
        return len(self.ops)

    def padded(self, n: int) -> "KrausChannel":
        """Append zero operators up to ``n``; the completeness sum is unchanged."""
        if n < len(self.ops):
            raise DimensionError(f"cannot pad {len(self.ops)} Kraus operators down to {n}",
                                 module="qcore", operation="KrausChannel.padded")
        zero = np.zeros_like(self.ops[0])
        return KrausChannel(self.ops + (zero,) * (n - len(self.ops)))


@dataclass(frozen=True)
class RegisterLayout:
    dims: tuple = field(default=())

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 1 for d in dims):
            raise DimensionError(f"invalid register dimensions {dims}",
                                 module="qcore", operation="RegisterLayout")
        object.__setattr__(self, "dims", dims)

    @property
    def total(self) -> int:
        return math.prod(self.dims)

    def flat_index(self, digits: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(digits), self.dims))

    def digits(self, flat: int) -> tuple:
        return tuple(int(x) for x in np.unravel_index(flat, self.dims))


def _dims(layout) -> tuple:
    if isinstance(layout, RegisterLayout):
        return layout.dims
    return RegisterLayout(tuple(layout)).dims


# -- invariant checks -------------------------------------------------------

def check_unitary(u, tol: float = EXACT_TOL, operation: str = "check_unitary"):
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise DimensionError(f"unitary must be square, got shape {u.shape}",
                             module="qcore", operation=operation)
    dev = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
    if dev > tol:
        raise InvariantError(f"U^dag U deviates from identity by {dev:.3e}",
                             module="qcore", operation=operation,
                             precondition=f"U^dag U = 1 within {tol:g}")


def check_density(rho, operation: str = "check_density"):
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"density matrix must be square, got {rho.shape}",
                             module="qcore", operation=operation)
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > EXACT_TOL:
        raise InvariantError(f"density matrix not Hermitian (dev {herm:.3e})",
                             module="qcore", operation=operation)
    tr = np.trace(rho)
    if abs(tr - 1) > EXACT_TOL:
        raise InvariantError(f"density matrix trace {tr} != 1",
                             module="qcore", operation=operation)
    lam = np.linalg.eigvalsh((rho + rho.conj().T) / 2)[0]
    if lam < -PSD_TOL:
        raise InvariantError(f"density matrix has eigenvalue {lam:.3e} < 0",
                             module="qcore", operation=operation)


def check_completeness(ops, tol: float = PSD_TOL, operation: str = "check_completeness"):
    ops = [np.asarray(op) for op in ops]
    total = sum(op.conj().T @ op for op in ops)
    dev = np.max(np.abs(total - np.eye(total.shape[0])))
    if dev > tol:
        raise InvariantError(f"Kraus completeness violated by {dev:.3e}",
                             module="qcore", operation=operation,
                             precondition=f"sum E^dag E = 1 within {tol:g}")


def check_projector(p, tol: float = EXACT_TOL):
    p = np.asarray(p)
    if np.max(np.abs(p - p.conj().T)) > tol or np.max(np.abs(p @ p - p)) > tol:
        raise InvariantError("projector must be Hermitian and idempotent",
                             module="qcore", operation="measure_projector")


# -- building blocks ----------------------------------------------------------

def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def basis_projector(index: int, dim: int) -> np.ndarray:
    p = np.zeros((dim, dim), dtype=complex)
    p[index, index] = 1.0
    return p


HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)


def uniform_unitary(m: int) -> np.ndarray:
    """A unitary F with F|0> = (1/sqrt m) sum_j |j>.

    Powers of two get the Walsh-Hadamard transform H^{(x)log m}; other sizes
    use the DFT matrix, whose first column is also uniform.
    """
    if m < 1:
        raise DimensionError("register size must be positive", module="qcore",
                             operation="uniform_unitary")
    if m & (m - 1) == 0:
        return scipy.linalg.hadamard(m).astype(complex) / math.sqrt(m)
    return scipy.linalg.dft(m).conj().astype(complex) / math.sqrt(m)


def complete_unitary(first_column) -> np.ndarray:
    """Deterministic unitary whose first column is ``first_column``.

    Gram-Schmidt over [v, e_0, e_1, ...], skipping basis vectors that are
    (numerically) already in the span.
    """
    v = np.asarray(first_column, dtype=complex)
    d = v.size
    cols = [v / np.linalg.norm(v)]
    for k in range(d):
        if len(cols) == d:
            break
        w = ket(k, d)
        for _ in range(2):  # re-orthogonalise once for stability
            for c in cols:
                w = w - np.vdot(c, w) * c
        n = np.linalg.norm(w)
        if n > 1e-8:
            cols.append(w / n)
    u = np.column_stack(cols)
    u[:, 0] = v  # keep the caller's column bit-for-bit
    return u


def tensor(*operands):
    """Kronecker product, first operand most significant."""
    if not operands:
        raise DimensionError("tensor needs at least one operand", module="qcore",
                             operation="tensor")
    out = np.asarray(operands[0])
    for op in operands[1:]:
        out = np.kron(out, np.asarray(op))
    return out


def _apply_left(arr: np.ndarray, op: np.ndarray, targets: Sequence[int], dims: tuple):
    """op acting on ``targets`` of the leading (row) index of ``arr``."""
    n = len(dims)
    trailing = arr.shape[1:]
    t = arr.reshape(dims + trailing)
    k = len(targets)
    tdims = [dims[i] for i in targets]
    op_t = np.asarray(op).reshape(tdims + tdims)
    out = np.tensordot(op_t, t, axes=(list(range(k, 2 * k)), list(targets)))
    out = np.moveaxis(out, list(range(k)), list(targets))
    return out.reshape((math.prod(dims),) + trailing)


def _resolve(state, op, targets, layout):
    state = np.asarray(state, dtype=complex)
    op = np.asarray(op, dtype=complex)
    if layout is None:
        dims = (state.shape[0],)
    else:
        dims = _dims(layout)
    if targets is None:
        targets = tuple(range(len(dims)))
    targets = tuple(int(t) for t in np.atleast_1d(targets))
    if len(set(targets)) != len(targets) or any(t < 0 or t >= len(dims) for t in targets):
        raise DimensionError(f"bad target registers {targets} for layout {dims}",
                             module="qcore", operation="apply")
    if math.prod(dims) != state.shape[0]:
        raise DimensionError(f"layout {dims} does not match state dimension {state.shape[0]}",
                             module="qcore", operation="apply")
    tdim = math.prod(dims[t] for t in targets)
    if op.shape != (tdim, tdim):
        raise DimensionError(f"operator shape {op.shape} does not match targets (dim {tdim})",
                             module="qcore", operation="apply")
    return state, op, targets, dims


def apply_operator(state, op, targets=None, layout=None):
    """Apply a linear operator (no unitarity check). Vectors get op|v>,
    matrices get op rho op^dag."""
    state, op, targets, dims = _resolve(state, op, targets, layout)
    if state.ndim == 1:
        return _apply_left(state, op, targets, dims)
    x = _apply_left(state, op, targets, dims)
    return _apply_left(x.conj().T, op, targets, dims).conj().T


def apply_unitary(state, u, targets=None, layout=None):
    check_unitary(u, operation="apply_unitary")
    return apply_operator(state, u, targets, layout)


def apply_conditional(state, layout, control: int, branches: dict):
    """Apply a different operator sequence on each value of a control register.

    ``branches`` maps control value -> list of (op, targets) with targets
    indexed in the full layout (the control register must not be a target).
    Equivalent to sum_v |v><v| (x) (ops_v), without building the big matrix.
    """
    dims = _dims(layout)
    psi = np.asarray(state, dtype=complex).reshape(dims)
    out = psi.copy()
    sub = dims[:control] + dims[control + 1:]

    def shift(t):
        if t == control:
            raise DimensionError("control register cannot be a target", module="qcore",
                                 operation="apply_conditional")
        return t if t < control else t - 1

    for value, ops in branches.items():
        piece = np.take(psi, value, axis=control).reshape(-1)
        for op, targets in ops:
            tg = tuple(shift(t) for t in np.atleast_1d(targets))
            piece = apply_operator(piece, op, tg, sub)
        idx = [slice(None)] * len(dims)
        idx[control] = value
        out[tuple(idx)] = piece.reshape(sub)
    return out.reshape(-1)


def controlled(u_list) -> np.ndarray:
    """sum_i |i><i| (x) U_i, control register first."""
    mats = [np.asarray(u, dtype=complex) for u in u_list]
    if not mats:
        raise DimensionError("controlled() needs at least one unitary", module="qcore",
                             operation="controlled")
    if any(m.shape != mats[0].shape for m in mats):
        raise DimensionError("controlled() unitaries must share a dimension", module="qcore",
                             operation="controlled")
    for m in mats:
        check_unitary(m, operation="controlled")
    return scipy.linalg.block_diag(*mats)


def apply_channel(rho, channel, targets=None, layout=None):
    ops = channel.ops if isinstance(channel, KrausChannel) else tuple(channel)
    check_completeness(ops, operation="apply_channel")
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2:
        raise DimensionError("apply_channel needs a density matrix", module="qcore",
                             operation="apply_channel")
    return sum(apply_operator(rho, e, targets, layout) for e in ops)


def partial_trace(rho, layout, keep: Iterable[int]) -> np.ndarray:
    """Reduced density matrix on the ``keep`` registers (kept in layout order)."""
    dims = _dims(layout)
    rho = np.asarray(rho, dtype=complex)
    total = math.prod(dims)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    if rho.shape != (total, total):
        raise DimensionError(f"layout {dims} does not match matrix {rho.shape}",
                             module="qcore", operation="partial_trace")
    keep = sorted(set(int(k) for k in keep))
    n = len(dims)
    letters = string.ascii_letters
    rows = list(letters[:n])
    cols = [letters[n + i] if i in keep else rows[i] for i in range(n)]
    out = "".join(rows[i] for i in keep) + "".join(cols[i] for i in keep)
    expr = "".join(rows) + "".join(cols) + "->" + out
    red = np.einsum(expr, rho.reshape(dims + dims))
    kd = math.prod(dims[i] for i in keep)
    return red.reshape(kd, kd)


def measure_projector(state, projector, targets=None, layout=None):
    """Project and renormalise. Returns (probability, post-measurement state)."""
    check_projector(projector)
    state = np.asarray(state, dtype=complex)
    post = apply_operator(state, projector, targets, layout)
    if state.ndim == 1:
        prob = float(np.vdot(post, post).real)
    else:
        prob = float(np.trace(post).real)
    prob = min(max(prob, 0.0), 1.0)
    if prob < MEASURE_FLOOR:
        raise MeasurementImpossible(f"outcome probability {prob:.3e} below {MEASURE_FLOOR:g}",
                                    module="qcore", operation="measure_projector",
                                    probability=prob)
    if state.ndim == 1:
        return prob, post / math.sqrt(prob)
    return prob, post / prob


def outcome_probability(state, projector, targets=None, layout=None) -> float:
    """Probability of a projective outcome, without the post-selection floor."""
    state = np.asarray(state, dtype=complex)
    post = apply_operator(state, projector, targets, layout)
    if state.ndim == 1:
        return float(np.vdot(post, post).real)
    return float(np.trace(post).real)


# -- sampling -----------------------------------------------------------------

def derive_seed(seed: int, *keys: int) -> int:
    """Child seed for (seed, keys...), stable across runs and platforms."""
    ss = np.random.SeedSequence([int(seed) % (2 ** 63)] + [int(k) for k in keys])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def sample_bernoulli(p: float, shots: int, seed: int, partitions: int = 1):
    """Count ones in ``shots`` Bernoulli(p) trials.

    Shots are split into ``partitions`` contiguous blocks, block k drawing
    from the generator seeded with (seed, k); the merged count is the same
    whether blocks run sequentially or in parallel.
    Returns (ones, estimate, standard error).
    """
    if not 0.0 <= p <= 1.0:
        if -EXACT_TOL < p < 1 + EXACT_TOL:
            p = min(max(p, 0.0), 1.0)
        else:
            raise ValueError(f"probability {p} outside [0, 1]")
    shots = int(shots)
    if shots < 1:
        raise ValueError("shots must be >= 1")
    partitions = max(1, min(int(partitions), shots))
    sizes = [shots // partitions + (1 if k < shots % partitions else 0) for k in range(partitions)]
    ones = sum(partition_count(p, n, seed, k) for k, n in enumerate(sizes))
    est = ones / shots
    return ones, est, math.sqrt(est * (1 - est) / shots)


def partition_count(p: float, shots: int, seed: int, index: int) -> int:
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) % (2 ** 63), int(index)]))
    return int(rng.binomial(shots, p))


# -- misc ---------------------------------------------------------------------

def overlap_magnitude(a, b) -> float:
    """|<a|b>| for normalised vectors; the phase-blind state comparison."""
    return float(abs(np.vdot(np.asarray(a), np.asarray(b))))


def trace_distance(a, b) -> float:
    diff = np.asarray(a) - np.asarray(b)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2))))


def haar_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = dim if rank is None else rank
    a = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_kraus(dim: int, n_ops: int, rng: np.random.Generator) -> tuple:
    """Kraus operators cut from a Haar isometry C^dim -> C^(n_ops*dim)."""
    v = haar_unitary(n_ops * dim, rng)[:, :dim]
    return tuple(v[l * dim:(l + 1) * dim, :] for l in range(n_ops))


def depolarizing_kraus(dim: int, p: float) -> tuple:
    """rho -> (1-p) rho + p 1/d, via sqrt(1-p) 1 and sqrt(p)/d * Weyl operators."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("depolarizing strength must lie in [0, 1]")
    omega = np.exp(2j * np.pi / dim)
    shift = np.roll(np.eye(dim), 1, axis=0)
    clock = np.diag(omega ** np.arange(dim))
    ops = [math.sqrt(1 - p) * np.eye(dim, dtype=complex)]
    for a in range(dim):
        for b in range(dim):
            w = np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b)
            ops.append(math.sqrt(p) / dim * w)
    return tuple(ops)


def propagate_stderr(fn, x, se, h: float = 1e-6) -> float:
    """First-order standard error of fn(x) for independent real inputs x with errors se.

    Gradient by central differences; inputs with zero error are skipped.
    """
    x = np.asarray(x, dtype=float)
    se = np.asarray(se, dtype=float)
    var = 0.0
    for k in np.flatnonzero(se):
        step = np.zeros_like(x)
        step[k] = h
        g = (fn(x + step) - fn(x - step)) / (2 * h)
        var += (g * se[k]) ** 2
    return math.sqrt(var)
