"""State-preparation circuits with post-selection bookkeeping.

Each routine simulates its circuit on the full register and records the
probability of every projective post-selection it performs. Register
layouts, most significant first:

    prepare_chi        label(M) data(d)
    prepare_centroid   label(M) data(d)
    prepare_centered   anc(2) label(M) data(d)
    prepare_chi_c      label1(M) anc(2) label2(M) data(d)
    prepare_AR_AI      anc(2) data(d) label(M) data(d)   [+ rotation qubit, removed]

The uniform-superposition gate on a label register is ``qcore.uniform_unitary``;
its adjoint plays the role of the "Hadamard back" step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import qcore, registry
from .errors import DegenerateError, InvariantError, MeasurementImpossible

ZERO_SQNORM = 1e-14
CENTROID_FLOOR = 1e-10

MINUS = np.array([1, -1], dtype=complex) / math.sqrt(2)


@dataclass(frozen=True, eq=False)
class PreparedState:
    state: qcore.PureState
    success_prob: float
    stage_probs: dict
    layout: qcore.RegisterLayout

    def __post_init__(self):
        prod = math.prod(self.stage_probs.values())
        if abs(prod - self.success_prob) > qcore.EXACT_TOL:
            raise InvariantError("success probability must equal the product of stage "
                                 "probabilities", module="stateprep",
                                 operation="PreparedState")


@dataclass(frozen=True)
class NormalizationLedger:
    """Squared normalization constants. ``inf`` marks a vanishing vector."""

    Nc2: float
    Ni2: tuple
    N02: float
    Nchic2: float
    trC: float
    undefined: tuple = ()   # indices (0 = test) whose centered vector is zero

    @property
    def M(self) -> int:
        return len(self.Ni2)

    def check(self):
        inv_sum = sum(0.0 if math.isinf(x) else 1.0 / x for x in self.Ni2)
        if inv_sum > 0:
            if abs(self.Nchic2 - 1.0 / inv_sum) > qcore.EXACT_TOL * max(1.0, self.Nchic2):
                raise InvariantError("Nchic2 != 1/sum(1/Ni2)", module="stateprep",
                                     operation="compute_ledger")
            if abs(self.trC - 1.0 / (self.Nchic2 * (self.M - 1))) > qcore.EXACT_TOL * max(1.0, self.trC):
                raise InvariantError("trC != 1/(Nchic2 (M-1))", module="stateprep",
                                     operation="compute_ledger")


def _vectors(ts):
    registry.require_pure(ts, "stateprep", module="stateprep")
    return ts.training_vectors(), ts.test_vector()


def _inv(x: float) -> float:
    return math.inf if x < ZERO_SQNORM else 1.0 / x


def compute_ledger(ts) -> NormalizationLedger:
    psi, psi0 = _vectors(ts)
    m = ts.M
    # the double sum is a squared norm; a visible imaginary part means an index slip
    double = sum(np.vdot(a, b) for a in psi for b in psi)
    if abs(double.imag) > 1e-10:
        raise InvariantError(f"double overlap sum has imaginary part {double.imag:.3e}",
                             module="stateprep", operation="compute_ledger")
    total = psi.sum(axis=0)
    c = total / m
    zsq = [float(np.vdot(v - c, v - c).real) for v in psi]
    z0sq = float(np.vdot(psi0 - c, psi0 - c).real)
    ni2 = tuple(_inv(x) for x in zsq)
    undefined = tuple(([0] if z0sq < ZERO_SQNORM else [])
                      + [i + 1 for i, x in enumerate(zsq) if x < ZERO_SQNORM])
    live = sum(x for x in zsq if x >= ZERO_SQNORM)
    led = NormalizationLedger(
        Nc2=_inv(float(np.vdot(total, total).real)),
        Ni2=ni2,
        N02=_inv(z0sq),
        Nchic2=_inv(live),
        trC=live / (m - 1),
        undefined=undefined,
    )
    led.check()
    return led


def prepare_chi(ts) -> qcore.PureState:
    """(1/sqrt M) sum_i |i>|psi_i> = U_C (F (x) 1)|0>|0>."""
    registry.require_pure(ts, "prepare_chi", module="stateprep")
    m, d = ts.M, ts.dim
    lay = qcore.RegisterLayout((m, d))
    v = qcore.ket(0, m * d)
    v = qcore.apply_unitary(v, qcore.uniform_unitary(m), [0], lay)
    v = qcore.apply_unitary(v, registry.controlled_source(ts), [0, 1], lay)
    return qcore.PureState(v)


def _centroid_circuit(ts):
    m, d = ts.M, ts.dim
    lay = qcore.RegisterLayout((m, d))
    v = prepare_chi(ts).amps
    v = qcore.apply_unitary(v, qcore.uniform_unitary(m).conj().T, [0], lay)
    return v, lay


def centroid_probability(ts) -> float:
    """P_chi from the circuit, without the existence check."""
    v, lay = _centroid_circuit(ts)
    return qcore.outcome_probability(v, qcore.basis_projector(0, ts.M), [0], lay)


def prepare_centroid(ts) -> PreparedState:
    registry.require_pure(ts, "prepare_centroid", module="stateprep")
    m, d = ts.M, ts.dim
    v, lay = _centroid_circuit(ts)
    p = qcore.outcome_probability(v, qcore.basis_projector(0, m), [0], lay)
    if p * m * m <= CENTROID_FLOOR:
        raise DegenerateError("centroid undefined: sum_i |psi_i> vanishes",
                              module="stateprep", operation="prepare_centroid",
                              precondition="|sum_ij <psi_i|psi_j>| > 1e-10",
                              probability=p)
    p, post = qcore.measure_projector(v, qcore.basis_projector(0, m), [0], lay)
    state = post.reshape(m, d)[0]
    return PreparedState(qcore.PureState(state), p, {"p_chi": p}, qcore.RegisterLayout((d,)))


def _label_shift(m: int, k: int) -> np.ndarray:
    """Permutation taking |0> to |k>."""
    return np.roll(np.eye(m, dtype=complex), k, axis=0)


def _hadamard_project(v, lay, anc: int, stages: dict, operation: str, what: str):
    """Measure the ancilla in |+> (Hadamard then project |0>)."""
    v = qcore.apply_unitary(v, qcore.HADAMARD, [anc], lay)
    p0 = qcore.outcome_probability(v, qcore.basis_projector(0, 2), [anc], lay)
    stages["p0"] = p0
    try:
        _, post = qcore.measure_projector(v, qcore.basis_projector(0, 2), [anc], lay)
    except MeasurementImpossible:
        raise DegenerateError(f"{what} does not exist (final post-selection probability "
                              f"{p0:.3e})", module="stateprep", operation=operation,
                              precondition=f"{what} nonzero", stage_probs=dict(stages)) from None
    return post


def prepare_centered(ts, kappa: int) -> PreparedState:
    """|z_kappa> proportional to |psi_kappa> - (1/M) sum_j |psi_j>; kappa = 0 is the test state."""
    registry.require_pure(ts, "prepare_centered", module="stateprep")
    m, d = ts.M, ts.dim
    if not 0 <= kappa <= m:
        raise ValueError(f"kappa must lie in 0..{m}")
    lay = qcore.RegisterLayout((2, m, d))
    f = qcore.uniform_unitary(m)
    uc = registry.controlled_source(ts)
    v = qcore.tensor(MINUS, qcore.ket(0, m), qcore.ket(0, d))
    if kappa == 0:
        branch0 = [(ts.test.unitary.mat, [2])]
    else:
        x = _label_shift(m, kappa - 1)
        branch0 = [(x, [1]), (uc, [1, 2]), (x.conj().T, [1])]
    branch1 = [(f, [1]), (uc, [1, 2]), (f.conj().T, [1])]
    v = qcore.apply_conditional(v, lay, 0, {0: branch0, 1: branch1})
    stages = {}
    p_lab, v = qcore.measure_projector(v, qcore.basis_projector(0, m), [1], lay)
    stages["p_label"] = p_lab
    post = _hadamard_project(v, lay, 0, stages, "prepare_centered",
                             f"centered state z_{kappa}")
    state = post.reshape(2, m, d)[0, 0]
    return PreparedState(qcore.PureState(state), p_lab * stages["p0"], stages,
                         qcore.RegisterLayout((d,)))


def prepare_chi_c(ts) -> PreparedState:
    """|chi_c> proportional to sum_i |i>(|psi_i> - (1/M) sum_j |psi_j>) on label1 (x) data."""
    registry.require_pure(ts, "prepare_chi_c", module="stateprep")
    m, d = ts.M, ts.dim
    lay = qcore.RegisterLayout((m, 2, m, d))
    f = qcore.uniform_unitary(m)
    uc = registry.controlled_source(ts)
    v = qcore.tensor(f[:, 0], MINUS, qcore.ket(0, m), qcore.ket(0, d))
    branch0 = [(uc, [0, 3])]
    branch1 = [(f, [2]), (uc, [2, 3]), (f.conj().T, [2])]
    v = qcore.apply_conditional(v, lay, 1, {0: branch0, 1: branch1})
    stages = {}
    p_lab, v = qcore.measure_projector(v, qcore.basis_projector(0, m), [2], lay)
    stages["p_label"] = p_lab
    post = _hadamard_project(v, lay, 1, stages, "prepare_chi_c",
                             "covariance (all centered training vectors vanish)")
    state = post.reshape(m, 2, m, d)[:, 0, 0, :].reshape(-1)
    return PreparedState(qcore.PureState(state), p_lab * stages["p0"], stages,
                         qcore.RegisterLayout((m, d)))


def covariance_density(prep: PreparedState) -> np.ndarray:
    """tr_1 |chi_c><chi_c|, the trace-normalized covariance."""
    return qcore.partial_trace(prep.state.amps, prep.layout, [1])


def rotation_strength(alpha, p_t: float) -> float:
    """Amplitude s = P_T sqrt(M) |alpha| left on |alpha-hat>|1> by the inversion rotation.

    For alpha solving (K + P_T M 1) alpha = e this equals |C_r A^{-1} e-hat|
    with A = K/M + P_T 1 and C_r = P_T, hence s <= 1.
    """
    a = np.asarray(alpha)
    return p_t * math.sqrt(a.size) * float(np.linalg.norm(a))


def prepare_AR_AI(alpha, variant: str, data_dim: int, p_t: float = 0.1) -> PreparedState:
    """(1/sqrt 2)(|0>|0>|0>|0> + zeta |1>|0>|alpha-hat>|0>), zeta = 1 (R) or i (I).

    Branch 1 maps the label to |e-hat> and applies the inversion rotation,
    leaving s|alpha-hat>|1> on the rotation qubit; branch 0 rotates the same
    qubit to amplitude s on |1>, so post-selecting |1> keeps the branches
    balanced. Success probability s^2.
    """
    a = np.asarray(alpha, dtype=complex).reshape(-1)
    m = a.size
    nrm = float(np.linalg.norm(a))
    if nrm < 1e-300:
        raise DegenerateError("alpha vector is zero", module="stateprep",
                              operation="prepare_AR_AI", precondition="alpha nonzero")
    if variant not in ("R", "I"):
        raise ValueError("variant must be 'R' or 'I'")
    s = rotation_strength(a, p_t)
    if s > 1 + qcore.EXACT_TOL:
        raise InvariantError(f"rotation amplitude {s:.6f} exceeds 1; alpha inconsistent with "
                             f"P_T={p_t}", module="stateprep", operation="prepare_AR_AI",
                             precondition="P_T sqrt(M) |alpha| <= 1")
    s = min(s, 1.0)
    c = math.sqrt(max(0.0, 1 - s * s))
    ahat = a / nrm
    d = int(data_dim)
    zeta = 1.0 if variant == "R" else 1j
    f = qcore.uniform_unitary(m)
    target = np.kron(f[:, 0], [c, 0]) + np.kron(ahat, [0, s])
    rot = qcore.complete_unitary(target) @ np.kron(f, np.eye(2)).conj().T
    ry = np.array([[c, -s], [s, c]], dtype=complex)
    lay = qcore.RegisterLayout((2, d, m, d, 2))
    v = qcore.tensor(np.array([1, zeta]) / math.sqrt(2), qcore.ket(0, d), qcore.ket(0, m),
                     qcore.ket(0, d), qcore.ket(0, 2))
    v = qcore.apply_conditional(v, lay, 0, {0: [(ry, [4])],
                                            1: [(f, [2]), (rot, [2, 4])]})
    p, post = qcore.measure_projector(v, qcore.basis_projector(1, 2), [4], lay)
    state = post.reshape(2, d, m, d, 2)[..., 1].reshape(-1)
    return PreparedState(qcore.PureState(state), p, {"p_rotation": p},
                         qcore.RegisterLayout((2, d, m, d)))
