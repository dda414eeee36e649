"""One-class least-squares SVM on quantum states.

Kernels: fidelity |<psi_i|psi_j>|^2 for pure sets, superfidelity for mixed.
The coefficients solve (K + P_T M 1) alpha = e (bias r = 1), classically or
by a simulated HHL run on (K/M + P_T 1)|alpha> = |e-hat>. The pure score
|sum_i alpha_i |<psi_i|psi_0>|^2 - 1| is computed directly or through the
|phi_1>/|phi_2> interference circuit; the mixed score is squared.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import hamsim, qcore, registry, stateprep, swaptest
from .errors import DegenerateError, InvariantError, MeasurementImpossible, UnsupportedError

KINDS = ("fidelity", "superfidelity")
DEFAULT_PT = 0.1
HHL_MARGIN = 0.1


@dataclass(frozen=True, eq=False)
class OverlapKernel:
    """K0_ij = <psi_i|psi_j>. ``density`` is the reduced label state tr_2|chi><chi| = K0^T/M."""

    mat: np.ndarray

    def __post_init__(self):
        k = np.array(self.mat, dtype=complex)
        if np.max(np.abs(k - k.conj().T)) > qcore.EXACT_TOL:
            raise InvariantError("K0 must be Hermitian", module="ocsvm", operation="OverlapKernel")
        if np.linalg.eigvalsh(k)[0] < -qcore.PSD_TOL:
            raise InvariantError("K0 must be PSD", module="ocsvm", operation="OverlapKernel")
        k.setflags(write=False)
        object.__setattr__(self, "mat", k)

    @property
    def density(self) -> np.ndarray:
        return self.mat.T / self.mat.shape[0]


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    mat: np.ndarray
    kind: str
    states: tuple = ()        # density matrices backing the entries (for the feature map)
    overlap: OverlapKernel | None = None
    mode: str = "exact"

    def __post_init__(self):
        k = np.array(self.mat, dtype=float)
        if self.kind not in KINDS:
            raise ValueError(f"kernel kind must be one of {KINDS}")
        if np.max(np.abs(k - k.T)) > qcore.EXACT_TOL:
            raise InvariantError("kernel matrix must be symmetric", module="ocsvm",
                                 operation="KernelMatrix")
        if np.max(np.abs(np.diag(k) - 1)) > qcore.PSD_TOL:
            raise InvariantError("kernel diagonal must be 1", module="ocsvm",
                                 operation="KernelMatrix")
        k.setflags(write=False)
        object.__setattr__(self, "mat", k)

    @property
    def M(self) -> int:
        return self.mat.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.mat))


@dataclass(frozen=True, eq=False)
class AlphaSolution:
    alpha: np.ndarray
    p_t: float
    solver: str
    kernel_kind: str
    residual: float
    lambda_min: float
    lambda_max: float
    condition_flag: bool      # 1/P_T exceeds log2 M
    r: float = 1.0
    success_prob: float | None = None
    phase_bits: int | None = None
    evolution: str | None = None

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.alpha))

    @property
    def alpha_hat(self) -> np.ndarray:
        return self.alpha / self.norm

    @property
    def M(self) -> int:
        return self.alpha.size


@dataclass(frozen=True)
class SvmScore:
    f: float
    route: str
    mode: str
    stderr: float
    shots: int
    value: complex             # sum_i alpha_i k(i, 0) (overlap route: rescaled <phi1|phi2>)
    probs: dict = field(default_factory=dict)
    success_probs: dict = field(default_factory=dict)


# -- kernels -------------------------------------------------------------------

def _pair_keys(m):
    return {(i, j): k for k, (i, j) in enumerate((i, j) for i in range(m) for j in range(i, m))}


def build_kernel_pure(ts, mode="exact", shots=None, seed=0):
    """Fidelity kernel from swap tests and K0 from the reduced state of |chi>."""
    registry.require_pure(ts, "build_kernel_pure", module="ocsvm")
    m = ts.M
    psi = ts.training_vectors()
    k = np.eye(m)
    keys = _pair_keys(m)
    for i in range(m):
        for j in range(i + 1, m):
            est = swaptest.standard_swap_test(psi[i], psi[j], mode, shots, seed, keys[(i, j)])
            k[i, j] = k[j, i] = est.value
    chi = stateprep.prepare_chi(ts)
    red = qcore.partial_trace(chi.amps, (m, ts.dim), [0])
    k0 = m * red.T
    direct = psi.conj() @ psi.T
    dev = np.max(np.abs(k0 - direct))
    if dev > qcore.EXACT_TOL:
        raise InvariantError(f"K0 from tr_2|chi><chi| deviates from direct overlaps by {dev:.3e}",
                             module="ocsvm", operation="build_kernel_pure")
    if mode == "exact":
        had = (k0.T * k0).real
        dev = np.max(np.abs(had - k))
        if dev > qcore.EXACT_TOL:
            raise InvariantError(f"K != K0^T * K0 (deviation {dev:.3e})", module="ocsvm",
                                 operation="build_kernel_pure")
    states = tuple(np.outer(v, v.conj()) for v in psi)
    ov = OverlapKernel(k0)
    return KernelMatrix(k, "fidelity", states, ov, mode), ov


def _purity_and_overlaps(rhos, mode, shots, seed):
    """tr(rho_a rho_b) for all pairs including a = b, by swap tests."""
    n = len(rhos)
    keys = _pair_keys(n)
    tr = np.zeros((n, n))
    se = np.zeros((n, n))
    for a in range(n):
        for b in range(a, n):
            est = swaptest.standard_swap_test(rhos[a], rhos[b], mode, shots, seed, keys[(a, b)])
            tr[a, b] = tr[b, a] = est.value
            se[a, b] = se[b, a] = est.stderr["pass"]
    return tr, se


def superfidelity_from_traces(tr: np.ndarray) -> np.ndarray:
    root = np.sqrt(np.clip(1.0 - np.diag(tr), 0.0, 1.0))
    return tr + np.outer(root, root)


def build_kernel_superfidelity(ts, mode="exact", shots=None, seed=0) -> KernelMatrix:
    rhos = [registry.realized_matrix(s) for s in ts.sources]
    tr, _ = _purity_and_overlaps(rhos, mode, shots, seed)
    k = superfidelity_from_traces(tr)
    # diagonal is tr rho^2 + (1 - tr rho^2) up to the clamp
    np.fill_diagonal(k, 1.0)
    return KernelMatrix(k, "superfidelity", tuple(rhos), None, mode)


def build_kernel(ts, kind=None, mode="exact", shots=None, seed=0) -> KernelMatrix:
    kind = kind or ("fidelity" if ts.kind == "pure" else "superfidelity")
    if kind == "fidelity":
        if ts.kind != "pure":
            raise UnsupportedError("fidelity kernel needs a pure set; use superfidelity",
                                   module="ocsvm", operation="build_kernel",
                                   precondition="pure-kind training set")
        return build_kernel_pure(ts, mode, shots, seed)[0]
    return build_kernel_superfidelity(ts, mode, shots, seed)


def feature_map(rho) -> np.ndarray:
    """(vec(rho) stacked by columns, sqrt(1 - tr rho^2))."""
    rho = np.asarray(rho)
    pur = float(np.trace(rho @ rho).real)
    return np.concatenate([rho.reshape(-1, order="F"), [math.sqrt(max(0.0, 1 - pur))]])


def verify_kernel_psd(k: KernelMatrix) -> dict:
    eig = np.linalg.eigvalsh(k.mat)
    report = {"min_eigenvalue": float(eig[0]), "eigenvalues": eig}
    if eig[0] < -qcore.PSD_TOL:
        raise InvariantError(f"kernel has eigenvalue {eig[0]:.3e} below -1e-10", module="ocsvm",
                             operation="verify_kernel_psd", precondition="K PSD within 1e-10",
                             min_eigenvalue=float(eig[0]))
    if k.kind == "superfidelity" and k.states:
        phi = np.array([feature_map(r) for r in k.states])
        gram = (phi.conj() @ phi.T).real
        dev = float(np.max(np.abs(gram - k.mat)))
        report["feature_gram_deviation"] = dev
        if k.mode == "exact" and dev > qcore.PSD_TOL:
            raise InvariantError(f"feature-map Gram deviates from kernel by {dev:.3e}",
                                 module="ocsvm", operation="verify_kernel_psd")
    return report


# -- alpha solves --------------------------------------------------------------

def _system(k: KernelMatrix, p_t: float) -> np.ndarray:
    m = k.M
    return k.mat + p_t * m * np.eye(m)


def _diagnostics(k: KernelMatrix, p_t: float):
    lam = np.linalg.eigvalsh(k.mat / k.M + p_t * np.eye(k.M))
    return float(lam[0]), float(lam[-1]), bool(1 / p_t > math.log2(k.M))


def _check_pt(p_t):
    if not 0 < p_t < 1:
        raise ValueError("P_T must lie in (0, 1)")


def solve_alpha_classical(k: KernelMatrix, p_t: float = DEFAULT_PT) -> AlphaSolution:
    _check_pt(p_t)
    m = k.M
    a = _system(k, p_t)
    alpha = np.linalg.solve(a, np.ones(m))
    res = float(np.linalg.norm(a @ alpha - np.ones(m)))
    lo, hi, flag = _diagnostics(k, p_t)
    return AlphaSolution(alpha, p_t, "classical", k.kind, res, lo, hi, flag)


def _hhl_evolutions(a_norm, k, p_t, t0, evolution, reps):
    """(U, U^-1) with U approximating exp(i A t0), A = K/M + P_T 1."""
    if evolution == "exact":
        w, v = np.linalg.eigh(a_norm)
        u = (v * np.exp(1j * w * t0)) @ v.conj().T
        return u, u.conj().T
    if evolution == "hamsim":
        if k.overlap is None:
            raise UnsupportedError("hamsim evolution needs the overlap kernel K0 (pure sets)",
                                   module="ocsvm", operation="solve_alpha_hhl",
                                   precondition="KernelMatrix.overlap available")
        k0 = k.overlap.density
        phase = np.exp(1j * p_t * t0)
        fwd = hamsim.simulated_evolution_operator(k0, -t0, reps) * phase
        bwd = hamsim.simulated_evolution_operator(k0, t0, reps) / phase
        return fwd, bwd
    raise ValueError("evolution must be 'exact' or 'hamsim'")


def solve_alpha_hhl(k: KernelMatrix, p_t: float = DEFAULT_PT, phase_bits: int = 8,
                    reps: int = 64, seed=None, evolution: str = "exact") -> AlphaSolution:
    """Simulated HHL for (K/M + P_T 1)|alpha> = |e-hat>.

    Registers: clock (2^t) (x) label (M) (x) rotation qubit. Phase estimation
    with U = exp(i A t0), t0 = 2 pi/(1 + P_T + 0.1); eigenvalue estimate
    lambda_k = 2 pi k/(2^t t0); rotation amplitude min(1, P_T/lambda_k) on
    |1>; uncompute; post-select rotation |1> and clock |0>. The simulation
    is deterministic, so ``seed`` is accepted for interface symmetry only.
    The returned alpha carries the scale that best fits (K + P_T M 1) alpha = e.
    """
    _check_pt(p_t)
    m = k.M
    n_clock = 2 ** int(phase_bits)
    t0 = 2 * math.pi / (1 + p_t + HHL_MARGIN)
    a_norm = k.mat / m + p_t * np.eye(m)
    u, u_inv = _hhl_evolutions(a_norm, k, p_t, t0, evolution, reps)
    e_hat = np.ones(m, dtype=complex) / math.sqrt(m)

    # clock in uniform superposition, controlled U^c on the label
    psi = np.empty((n_clock, m), dtype=complex)
    cur = e_hat.copy()
    for c in range(n_clock):
        psi[c] = cur
        cur = u @ cur
    psi /= math.sqrt(n_clock)
    # inverse QFT on the clock: |c> -> (1/sqrt N) sum_k exp(-2 pi i c k/N)|k>
    psi = np.fft.fft(psi, axis=0) / math.sqrt(n_clock)
    lam = 2 * math.pi * np.arange(n_clock) / (n_clock * t0)
    amp = np.zeros(n_clock)
    amp[1:] = np.minimum(1.0, p_t / lam[1:])
    branch = psi * amp[:, None]          # rotation qubit |1> branch
    # uncompute: QFT, controlled U^-c, uniform-superposition adjoint, project clock |0>
    branch = np.fft.ifft(branch, axis=0) * math.sqrt(n_clock)
    out = np.zeros(m, dtype=complex)
    cur_inv = np.eye(m, dtype=complex)
    for c in range(n_clock):
        out += cur_inv @ branch[c]
        cur_inv = u_inv @ cur_inv
    out /= math.sqrt(n_clock)
    prob = float(np.vdot(out, out).real)
    if prob < 1e-12:
        raise MeasurementImpossible(f"HHL post-selection probability {prob:.3e} below 1e-12",
                                    module="ocsvm", operation="solve_alpha_hhl",
                                    precondition="post-selection probability >= 1e-12",
                                    probability=prob, phase_bits=phase_bits)
    ahat = out / math.sqrt(prob)
    b = _system(k, p_t)
    ba = b @ ahat
    scale = np.vdot(ba, np.ones(m)) / np.vdot(ba, ba)
    alpha = scale * ahat
    if np.max(np.abs(alpha.imag)) < 1e-12 * max(1.0, np.max(np.abs(alpha))):
        alpha = alpha.real
    res = float(np.linalg.norm(b @ alpha - np.ones(m)))
    lo, hi, flag = _diagnostics(k, p_t)
    return AlphaSolution(alpha, p_t, "hhl", k.kind, res, lo, hi, flag, success_prob=prob,
                         phase_bits=int(phase_bits), evolution=evolution)


def direction_error(a: AlphaSolution, b: AlphaSolution) -> float:
    """1 - |<a-hat|b-hat>|."""
    return 1.0 - abs(np.vdot(a.alpha_hat, b.alpha_hat))


# -- scoring ---------------------------------------------------------------------

def _test_row(ts, kind, mode, shots, seed):
    """k(i, 0) for i = 1..M with value standard errors (superfidelity also returns raw parts)."""
    m = ts.M
    base = 10 ** 6  # key offset; keeps these shot streams apart from kernel construction
    if kind == "fidelity":
        psi = ts.training_vectors()
        psi0 = ts.test_vector()
        ests = [swaptest.standard_swap_test(psi[i], psi0, mode, shots, seed, base + i)
                for i in range(m)]
        return np.array([e.value for e in ests]), np.array([e.stderr["pass"] for e in ests]), None
    rhos = [registry.realized_matrix(s) for s in (ts.test,) + ts.sources]
    tr = np.zeros(m + 1)
    se = np.zeros(m + 1)
    pur = np.zeros(m + 1)
    pse = np.zeros(m + 1)
    for a in range(m + 1):
        e = swaptest.standard_swap_test(rhos[a], rhos[a], mode, shots, seed, base + 2 * a)
        pur[a], pse[a] = e.value, e.stderr["pass"]
        if a:
            e = swaptest.standard_swap_test(rhos[a], rhos[0], mode, shots, seed, base + 2 * a + 1)
            tr[a], se[a] = e.value, e.stderr["pass"]
    return tr[1:], se[1:], (pur, pse)


def _row_value(tr_i0, pur):
    root = np.sqrt(np.clip(1.0 - pur, 0.0, 1.0))
    return tr_i0 + root[1:] * root[0]


def score_svm_direct(ts, alpha: AlphaSolution, kind=None, mode="exact", shots=None,
                     seed=0) -> SvmScore:
    """Fidelity kind: |sum alpha_i F_i0 - 1|. Superfidelity kind: |sum alpha_i F_i0 - 1|^2."""
    kind = kind or alpha.kernel_kind
    if kind != alpha.kernel_kind:
        raise UnsupportedError(f"alpha was solved with the {alpha.kernel_kind} kernel, "
                               f"scoring asked for {kind}", module="ocsvm",
                               operation="score_svm_direct", precondition="matching kernel kind")
    if kind == "fidelity":
        registry.require_pure(ts, "score_svm_direct", module="ocsvm")
    a = alpha.alpha
    row, se, extra = _test_row(ts, kind, mode, shots, seed)
    if kind == "fidelity":
        s = complex(a @ row)
        f = abs(s - 1)
        stderr = float(np.sqrt(np.sum(np.abs(a) ** 2 * se ** 2)))
        n_est = ts.M
    else:
        pur, pse = extra
        s = complex(a @ _row_value(row, pur))
        f = abs(s - 1) ** 2
        x = np.concatenate([row, pur])
        sx = np.concatenate([se, pse])
        m = ts.M
        fn = lambda xv: abs(a @ _row_value(xv[:m], xv[m:]) - 1) ** 2
        stderr = qcore.propagate_stderr(fn, x, sx) if mode == "shots" else 0.0
        n_est = 2 * m + 1
    total = n_est * int(shots) if mode == "shots" else 0
    return SvmScore(float(f), "direct", mode, float(stderr), total, s)


def _u1_part(ts) -> np.ndarray:
    """sum_j U_j (x) |j><j| on (data1 (x) label)."""
    m = ts.M
    return sum(np.kron(s.unitary.mat, qcore.basis_projector(j, m)) for j, s in enumerate(ts.sources))


def phi_overlap_probabilities(ts, alpha: AlphaSolution):
    """Exact P_R, P_I and the |A_R>/|A_I> success probabilities.

    Runs U~_c = |0><0| (x) U~_1 (1 (x) H~ (x) 1) + |1><1| (x) U~_2 on each
    prepared state, then a Hadamard on the ancilla; P = P(ancilla = 1).
    """
    registry.require_pure(ts, "score_svm_overlap_circuit", module="ocsvm")
    m, d = ts.M, ts.dim
    lay = qcore.RegisterLayout((2, d, m, d))
    u0 = ts.test.unitary.mat
    f = qcore.uniform_unitary(m)
    branches = {0: [(f, [2]), (_u1_part(ts), [1, 2]), (u0, [3])],
                1: [(u0, [1]), (registry.controlled_source(ts), [2, 3])]}
    probs, succ = {}, {}
    for variant in ("R", "I"):
        prep = stateprep.prepare_AR_AI(alpha.alpha, variant, d, alpha.p_t)
        v = qcore.apply_conditional(prep.state.amps, lay, 0, branches)
        v = qcore.apply_unitary(v, qcore.HADAMARD, [0], lay)
        probs[variant] = qcore.outcome_probability(v, qcore.basis_projector(1, 2), [0], lay)
        succ[f"A_{variant}"] = prep.success_prob
    return probs, succ


def score_svm_overlap_circuit(ts, alpha: AlphaSolution, mode="exact", shots=None,
                              seed=0) -> SvmScore:
    """f = |sqrt(M) |alpha| <phi_1|phi_2> - 1| with the overlap read from P_R, P_I.

    <phi_1|phi_2> = sum_i alpha-hat_i |<psi_i|psi_0>|^2 / sqrt(M) for unit
    alpha-hat, so the factor sqrt(M) |alpha| restores sum_i alpha_i F_i0.
    """
    if ts.kind != "pure":
        raise UnsupportedError("overlap-circuit scoring is defined for pure sets only",
                               module="ocsvm", operation="score_svm_overlap_circuit",
                               precondition="pure-kind training set")
    if alpha.kernel_kind != "fidelity":
        raise UnsupportedError("overlap-circuit scoring needs a fidelity-kernel alpha",
                               module="ocsvm", operation="score_svm_overlap_circuit")
    if mode not in swaptest.MODES:
        raise ValueError(f"mode must be one of {swaptest.MODES}")
    exact, succ = phi_overlap_probabilities(ts, alpha)
    probs, se = {}, {}
    for k, variant in enumerate(("R", "I")):
        if mode == "exact":
            probs[variant], se[variant] = exact[variant], 0.0
        else:
            _, probs[variant], se[variant] = qcore.sample_bernoulli(
                exact[variant], shots, qcore.derive_seed(seed, 2 * 10 ** 6 + k))
    scale = math.sqrt(ts.M) * alpha.norm
    raw = complex(1 - 2 * probs["R"], 2 * probs["I"] - 1)
    value = raw * scale
    f = abs(value - 1)
    stderr = 0.0
    if mode == "shots":
        fn = lambda x: abs(scale * complex(1 - 2 * x[0], 2 * x[1] - 1) - 1)
        stderr = qcore.propagate_stderr(fn, [probs["R"], probs["I"]], [se["R"], se["I"]])
    total = 2 * int(shots) if mode == "shots" else 0
    return SvmScore(float(f), "overlap-circuit", mode, float(stderr), total, value,
                    {"P_R": probs["R"], "P_I": probs["I"], "raw_overlap": raw}, succ)


def score(ts, alpha: AlphaSolution, route="direct", mode="exact", shots=None, seed=0) -> SvmScore:
    if route == "direct":
        return score_svm_direct(ts, alpha, None, mode, shots, seed)
    if route == "overlap-circuit":
        return score_svm_overlap_circuit(ts, alpha, mode, shots, seed)
    raise ValueError(f"unknown ocsvm route {route!r}")
