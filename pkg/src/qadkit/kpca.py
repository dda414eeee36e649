"""Kernel-PCA anomaly scores for quantum data.

Three routes to the same proximity measure:

* ``score_pure_innerproducts`` estimates every <psi_i|psi_kappa> with the
  modified swap test and assembles f from them.
* ``score_pure_global`` prepares the covariance state and measures its
  overlap with |z_0> in one swap test.
* ``score_mixed`` uses the Kraus inner product in place of <psi_i|psi_kappa>.

Conventions: a vanishing centered test vector gives f = 0; a vanishing
covariance with a nonzero centered test vector gives f = 1 (flagged).
f is returned unclamped; values outside [0, 1] are flagged. They occur
when training states have strongly opposed phases so that C has an
eigenvalue above 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import qcore, registry, stateprep, swaptest
from .errors import DegenerateError, DimensionError

ZERO_SQNORM = 1e-14
ROUTES = ("inner-products", "global", "mixed")


@dataclass(frozen=True)
class KpcaScore:
    f: float
    route: str
    mode: str
    stderr: float
    shots: int                 # total shots consumed
    overlaps: np.ndarray       # (M+1)-square inner products, index 0 = test (global: None)
    ledger: stateprep.NormalizationLedger | None
    success_probs: dict = field(default_factory=dict)
    flags: tuple = ()


def _check_args(ts, mode, shots):
    if ts.M < 2:
        raise DimensionError("kernel PCA needs M >= 2", module="kpca", operation="score",
                             precondition="M >= 2")
    if mode not in swaptest.MODES:
        raise ValueError(f"mode must be one of {swaptest.MODES}")
    if mode == "shots" and (shots is None or int(shots) < 1):
        raise ValueError("shot mode needs shots >= 1")


def _ledger_from_overlaps(g: np.ndarray) -> stateprep.NormalizationLedger:
    m = g.shape[0] - 1
    t = g[1:, 1:]
    total = t.sum().real
    c2 = total / m ** 2
    zsq = [g[i, i].real - 2 * t[i - 1].sum().real / m + c2 for i in range(1, m + 1)]
    z0sq = g[0, 0].real - 2 * g[0, 1:].sum().real / m + c2
    inv = lambda x: math.inf if x < ZERO_SQNORM else 1.0 / x
    live = sum(x for x in zsq if x >= ZERO_SQNORM)
    undefined = tuple(([0] if z0sq < ZERO_SQNORM else [])
                      + [i + 1 for i, x in enumerate(zsq) if x < ZERO_SQNORM])
    return stateprep.NormalizationLedger(Nc2=inv(total), Ni2=tuple(inv(x) for x in zsq),
                                         N02=inv(z0sq), Nchic2=inv(live), trC=live / (m - 1),
                                         undefined=undefined)


def _f_from_overlaps(g: np.ndarray):
    """f = 1 - N0^2/(M-1) sum_i |<z_i|z_0>|^2 with unnormalized centered overlaps.

    <z_i|z_0> = g_i0 - (1/M) sum_j g_ij - (1/M) sum_j g_j0 + (1/M^2) sum_jl g_jl.
    """
    m = g.shape[0] - 1
    t = g[1:, 1:]
    mean_all = t.sum() / m ** 2
    c2 = mean_all.real
    z0sq = g[0, 0].real - 2 * g[0, 1:].sum().real / m + c2
    if z0sq < ZERO_SQNORM:
        return 0.0, ("z0-zero",)
    zsum = sum(g[i, i].real - 2 * t[i - 1].sum().real / m + c2 for i in range(1, m + 1))
    if zsum < ZERO_SQNORM:
        return 1.0, ("covariance-degenerate",)
    col = g[1:, 0].sum() / m
    zz = g[1:, 0] - t.sum(axis=1) / m - col + mean_all
    return 1.0 - float(np.sum(np.abs(zz) ** 2)) / (z0sq * (m - 1)), ()


def _range_flags(f: float, mode: str) -> tuple:
    if mode == "exact" and not -1e-10 <= f <= 1 + 1e-10:
        return ("out-of-range",)
    return ()


def _pairs(n: int):
    return [(a, b) for a in range(n) for b in range(a + 1, n)]


def _assemble(n, pairs, values):
    g = np.eye(n, dtype=complex)
    for (a, b), v in zip(pairs, values):
        g[a, b] = v
        g[b, a] = np.conj(v)
    return g


def _score_from_estimates(n, pairs, ests, mode):
    """f and its propagated stderr from per-pair complex estimates."""
    values = [e.value for e in ests]
    g = _assemble(n, pairs, values)
    f, flags = _f_from_overlaps(g)
    stderr = 0.0
    if mode == "shots" and not flags:
        x = np.array([[v.real, v.imag] for v in values]).reshape(-1)
        se = np.array([[e.stderr["re"], e.stderr["im"]] for e in ests]).reshape(-1)

        def fn(xv):
            z = xv.reshape(-1, 2)
            return _f_from_overlaps(_assemble(n, pairs, z[:, 0] + 1j * z[:, 1]))[0]

        stderr = qcore.propagate_stderr(fn, x, se)
    return g, f, flags, stderr


def score_pure_innerproducts(ts, mode="exact", shots=None, seed=0) -> KpcaScore:
    _check_args(ts, mode, shots)
    registry.require_pure(ts, "score_pure_innerproducts", module="kpca")
    srcs = (ts.test,) + ts.sources
    n = len(srcs)
    pairs = _pairs(n)
    ests = [swaptest.complex_overlap(srcs[a], srcs[b], mode, shots, seed, key=k)
            for k, (a, b) in enumerate(pairs)]
    g, f, flags, stderr = _score_from_estimates(n, pairs, ests, mode)
    total = sum(e.total_shots for e in ests)
    return KpcaScore(f, "inner-products", mode, stderr, total, g, _ledger_from_overlaps(g),
                     {}, flags + _range_flags(f, mode))


def score_pure_global(ts, mode="exact", shots=None, seed=0) -> KpcaScore:
    """f = 1 - tr(C) tr(C_norm |z0><z0|), tr(C) = M(1 - P_chi)/(M - 1).

    Raises DegenerateError when every centered training vector vanishes
    (unless z0 vanishes too, which is the f = 0 limit).
    """
    _check_args(ts, mode, shots)
    registry.require_pure(ts, "score_pure_global", module="kpca")
    m = ts.M
    try:
        z0 = stateprep.prepare_centered(ts, 0)
    except DegenerateError as exc:
        probs = {f"z0_{k}": v for k, v in exc.details.get("stage_probs", {}).items()}
        return KpcaScore(0.0, "global", mode, 0.0, 0, None, None, probs, ("z0-zero",))
    try:
        chic = stateprep.prepare_chi_c(ts)
    except DegenerateError as exc:
        raise DegenerateError("covariance undefined: all centered training vectors vanish",
                              module="kpca", operation="score_pure_global",
                              precondition="at least one |z_i> nonzero",
                              **exc.details) from None
    cov = stateprep.covariance_density(chic)
    swap = swaptest.standard_swap_test(cov, z0.state, mode, shots, seed, key=0)
    p_chi_exact = stateprep.centroid_probability(ts)
    if mode == "exact":
        p_chi, se_p = p_chi_exact, 0.0
    else:
        _, p_chi, se_p = qcore.sample_bernoulli(p_chi_exact, shots, qcore.derive_seed(seed, 1))
    overlap = swap.value
    tr_c = m * (1 - p_chi) / (m - 1)
    f = 1.0 - tr_c * overlap
    stderr = 0.0
    if mode == "shots":
        se_t = swap.stderr["pass"]
        stderr = math.sqrt((tr_c * se_t) ** 2 + (overlap * m / (m - 1) * se_p) ** 2)
    probs = {"p_chi": p_chi_exact,
             **{f"z0_{k}": v for k, v in z0.stage_probs.items()},
             **{f"chi_c_{k}": v for k, v in chic.stage_probs.items()}}
    total = (2 * int(shots)) if mode == "shots" else 0
    return KpcaScore(f, "global", mode, stderr, total, None, stateprep.compute_ledger(ts),
                     probs, _range_flags(f, mode))


def score_mixed(ts, mode="exact", shots=None, seed=0) -> KpcaScore:
    """Mixed-state score with the Kraus inner product.

    N0~^2 = 1/(1 + (1/M^2) sum_jl <rho_j, rho_l> - (2/M) Re sum_i <rho_0, rho_i>),
    the form that reduces to |N_0|^2 for unitary channels.
    """
    _check_args(ts, mode, shots)
    registry.require_mixed(ts, "score_mixed", module="kpca")
    srcs = (ts.test,) + ts.sources
    n = len(srcs)
    pairs = _pairs(n)
    ests = [swaptest.kraus_inner_product(srcs[a], srcs[b], mode, shots, seed, key=k)
            for k, (a, b) in enumerate(pairs)]
    g, f, flags, stderr = _score_from_estimates(n, pairs, ests, mode)
    total = sum(e.total_shots for e in ests)
    return KpcaScore(f, "mixed", mode, stderr, total, g, _ledger_from_overlaps(g), {},
                     flags + _range_flags(f, mode))


def score(ts, route="auto", mode="exact", shots=None, seed=0, fallback=False) -> KpcaScore:
    """Dispatch on route. With ``fallback`` a degenerate covariance on the
    global route yields the f = 1 convention instead of an error."""
    if route == "auto":
        route = "mixed" if ts.kind == "mixed" else "inner-products"
    if route == "inner-products":
        return score_pure_innerproducts(ts, mode, shots, seed)
    if route == "global":
        try:
            return score_pure_global(ts, mode, shots, seed)
        except DegenerateError:
            if not fallback:
                raise
            return KpcaScore(1.0, "global", mode, 0.0, 0, None, None, {},
                             ("covariance-degenerate", "fallback"))
    if route == "mixed":
        return score_mixed(ts, mode, shots, seed)
    raise ValueError(f"unknown kpca route {route!r}; choose from {ROUTES}")
