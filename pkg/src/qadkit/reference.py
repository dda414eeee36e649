"""Classical brute-force oracles.

Everything here is plain numpy on raw amplitude vectors and Kraus matrices.
Nothing from the circuit simulator is imported, so agreement between the
two paths is meaningful. Closed forms are used where the simulator builds
circuits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateError

ZERO_SQNORM = 1e-14


@dataclass(frozen=True, eq=False)
class ClassicalDataset:
    train: np.ndarray  # (M, d)
    test: np.ndarray   # (d,)

    def __post_init__(self):
        train = np.atleast_2d(np.asarray(self.train))
        test = np.asarray(self.test).reshape(-1)
        if train.shape[1] != test.size:
            raise ValueError(f"training vectors have dim {train.shape[1]}, test has {test.size}")
        object.__setattr__(self, "train", train)
        object.__setattr__(self, "test", test)

    @property
    def M(self) -> int:
        return self.train.shape[0]


def kpca_score_classical(ds: ClassicalDataset) -> float:
    """|z0|^2 - z0^dag C z0 with the centered sample covariance C."""
    x = ds.train
    m = ds.M
    if m < 2:
        raise ValueError("kernel PCA needs M >= 2")
    xc = x.mean(axis=0)
    z = x - xc
    cov = z.T @ z.conj() / (m - 1)  # sum_i z_i z_i^dag
    z0 = ds.test - xc
    return float(np.vdot(z0, z0).real - np.vdot(z0, cov @ z0).real)


def kpca_score_normalized(ds: ClassicalDataset) -> float:
    """The classical score divided by |z0|^2; 0 when z0 vanishes."""
    z0 = ds.test - ds.train.mean(axis=0)
    n2 = float(np.vdot(z0, z0).real)
    if n2 < ZERO_SQNORM:
        return 0.0
    return kpca_score_classical(ds) / n2


def svm_solve_restricted(kernel, p_t: float, c: float = 1.0) -> np.ndarray:
    """alpha from (K + P_T M 1) alpha = c e."""
    k = np.asarray(kernel)
    m = k.shape[0]
    return np.linalg.solve(k + p_t * m * np.eye(m), c * np.ones(m))


def svm_solve_full(kernel, p_t: float):
    """Bordered system [[0, e^T], [e, K + P_T M 1]] (-r, alpha) = (1, 0).

    Returns (r, alpha).
    """
    k = np.asarray(kernel)
    m = k.shape[0]
    f = np.zeros((m + 1, m + 1), dtype=np.result_type(k, float))
    f[0, 1:] = 1.0
    f[1:, 0] = 1.0
    f[1:, 1:] = k + p_t * m * np.eye(m)
    if np.linalg.cond(f) > 1e12:
        raise DegenerateError("bordered LS-SVM system is singular", module="reference",
                              operation="svm_solve_full",
                              precondition="bordered matrix nonsingular")
    rhs = np.zeros(m + 1)
    rhs[0] = 1.0
    sol = np.linalg.solve(f, rhs)
    return float(-sol[0].real), sol[1:]


def svm_score_classical(ds: ClassicalDataset, alpha, r: float = 1.0) -> float:
    """|w^dag x0 - r| with w = sum_i alpha_i x_i (linear kernel)."""
    w = np.asarray(alpha) @ ds.train
    return float(abs(np.vdot(w, ds.test) - r))


# -- dense report for quantum training sets ---------------------------------

@dataclass
class OracleReport:
    kind: str
    M: int
    gram: np.ndarray          # <v_a|v_b>, index 0 = test, 1..M = training
    fidelity: np.ndarray      # |<psi_i|psi_j>|^2 for pure, tr(rho_i rho_j) for mixed
    purities: np.ndarray      # tr rho^2, index 0 = test
    superfidelity: np.ndarray  # (M+1)x(M+1) superfidelity, same indexing
    kernel: np.ndarray        # training kernel used by the SVM (fidelity or superfidelity)
    k0: np.ndarray | None     # K0_ij = <psi_i|psi_j> (pure only)
    ledger: dict
    probs: dict
    f_kpca: float
    kpca_flags: list
    p_t: float
    alpha: np.ndarray
    f_svm: float
    phi_overlap: complex | None = None
    extra: dict = field(default_factory=dict)


def _vectors(ts):
    """Amplitude vectors (pure) or stacked Kraus columns (mixed): index 0 = test."""
    srcs = (ts.test,) + tuple(ts.sources)
    if ts.kind == "pure":
        return np.array([np.asarray(s.unitary.mat)[:, 0] for s in srcs])
    return np.array([np.concatenate([np.asarray(e)[:, 0] for e in s.channel.ops]) for s in srcs])


def _densities(ts):
    srcs = (ts.test,) + tuple(ts.sources)
    out = []
    for s in srcs:
        if ts.kind == "pure":
            v = np.asarray(s.unitary.mat)[:, 0]
            out.append(np.outer(v, v.conj()))
        else:
            out.append(sum(np.outer(np.asarray(e)[:, 0], np.asarray(e)[:, 0].conj())
                           for e in s.channel.ops))
    return np.array(out)


def kraus_inner_products(ts) -> np.ndarray:
    """W[a, b] = sum_l <0|E_l^(a)dag E_l^(b)|0> by explicit matrix products."""
    srcs = (ts.test,) + tuple(ts.sources)
    n = len(srcs)
    w = np.zeros((n, n), dtype=complex)
    for a in range(n):
        for b in range(n):
            w[a, b] = sum((np.asarray(ea).conj().T @ np.asarray(eb))[0, 0]
                          for ea, eb in zip(srcs[a].kraus, srcs[b].kraus))
    return w


def ledger_from_gram(g: np.ndarray) -> dict:
    """Normalization constants from the (M+1)-square inner-product matrix."""
    m = g.shape[0] - 1
    gt = g[1:, 1:]
    total = gt.sum()
    c2 = float(total.real) / m ** 2                     # ||c||^2, c = (1/M) sum psi
    zi2 = np.array([float((g[i, i] - 2 * gt[i - 1].sum().real / m).real) + c2
                    for i in range(1, m + 1)])
    z02 = float(g[0, 0].real - 2 * g[0, 1:].sum().real / m + c2)
    zi2 = np.where(zi2 < ZERO_SQNORM, 0.0, zi2)
    inv = lambda x: np.inf if x < ZERO_SQNORM else 1.0 / x
    sum_z = float(zi2.sum())
    return {
        "Nc2": inv(float(total.real)),
        "Ni2": np.array([inv(x) for x in zi2]),
        "N02": inv(z02),
        "Nchic2": inv(sum_z),
        "trC": sum_z / (m - 1),
        "z_sqnorms": zi2,
        "z0_sqnorm": max(z02, 0.0),
        "centroid_sqnorm": c2,
        "double_sum_imag": float(total.imag),
    }


def centered_overlaps(g: np.ndarray) -> np.ndarray:
    """Unnormalized <z_i|z_0> for i = 1..M from the inner-product matrix."""
    m = g.shape[0] - 1
    gt = g[1:, 1:]
    mean_all = gt.sum() / m ** 2
    return np.array([g[i, 0] - g[i, 1:].sum() / m - g[1:, 0].sum() / m + mean_all
                     for i in range(1, m + 1)])


def kpca_from_gram(g: np.ndarray):
    """f = 1 - N0^2/(M-1) sum_i |<z_i|z_0>|^2, with the degenerate conventions."""
    led = ledger_from_gram(g)
    m = g.shape[0] - 1
    if led["z0_sqnorm"] < ZERO_SQNORM:
        return 0.0, ["z0-zero"]
    if led["z_sqnorms"].sum() < ZERO_SQNORM:
        return 1.0, ["covariance-degenerate"]
    zz = centered_overlaps(g)
    f = 1.0 - led["N02"] / (m - 1) * float(np.sum(np.abs(zz) ** 2))
    return f, []


def _superfidelity(rhos: np.ndarray) -> tuple:
    n = len(rhos)
    tr = np.array([[np.trace(rhos[a] @ rhos[b]).real for b in range(n)] for a in range(n)])
    pur = np.diag(tr).copy()
    root = np.sqrt(np.clip(1.0 - pur, 0.0, 1.0))
    return tr, pur, tr + np.outer(root, root)


def dense_quantum_oracle(ts, p_t: float = 0.1) -> OracleReport:
    """Every detector quantity for ``ts`` by direct linear algebra."""
    m = ts.M
    vecs = _vectors(ts)
    rhos = _densities(ts)
    if ts.kind == "pure":
        g = vecs.conj() @ vecs.T
    else:
        g = kraus_inner_products(ts)
    tr, pur, sf = _superfidelity(rhos)
    led = ledger_from_gram(g)
    c2 = led["centroid_sqnorm"]
    probs = {
        "p_chi": c2,
        "p_label_B": 0.5 * (1 + c2),
        "p0_B": np.array([0.5 * led["z0_sqnorm"] / (1 + c2)]
                         + [0.5 * x / (1 + c2) for x in led["z_sqnorms"]]),
        "p_label_C": 0.5 * (1 + c2),
        "p0_C": 0.5 * (1 - c2) / (1 + c2),
    }
    f_kpca, flags = kpca_from_gram(g)

    # classical score on the raw vectors as an independent second evaluation (pure only;
    # for mixed sets the stacked Kraus columns play the role of the vectors).
    ds = ClassicalDataset(vecs[1:], vecs[0])
    f_classical = kpca_score_normalized(ds) if not flags else f_kpca

    if ts.kind == "pure":
        kernel = np.abs(g[1:, 1:]) ** 2
        k0 = g[1:, 1:].copy()
        alpha = svm_solve_restricted(kernel, p_t)
        fid0 = np.abs(g[1:, 0]) ** 2
        s = float(alpha @ fid0)
        f_svm = abs(s - 1)
        ahat = alpha / np.linalg.norm(alpha)
        phi = complex(ahat @ fid0 / np.sqrt(m))
    else:
        kernel = sf[1:, 1:]
        k0 = None
        alpha = svm_solve_restricted(kernel, p_t)
        s = float(alpha @ sf[1:, 0])
        f_svm = abs(s - 1) ** 2
        phi = None
    return OracleReport(kind=ts.kind, M=m, gram=g, fidelity=tr, purities=pur,
                        superfidelity=sf, kernel=kernel, k0=k0, ledger=led, probs=probs,
                        f_kpca=f_kpca, kpca_flags=flags, p_t=p_t, alpha=alpha, f_svm=f_svm,
                        phi_overlap=phi, extra={"f_classical": f_classical, "svm_sum": s})
