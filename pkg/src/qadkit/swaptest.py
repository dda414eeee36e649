"""Overlap estimators: modified swap test, standard swap test, Kraus interferometer.

Every estimator simulates its circuit, reads off the exact ancilla
probability, and in shot mode replaces it by a Bernoulli sample mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import qcore
from .errors import DimensionError, UnsupportedError

MODES = ("exact", "shots")

# Printed Im gate; it equals S.H and therefore reads out Re again (see
# kraus_inner_product). Its adjoint is the gate that reads Im.
IM_GATE_PRINTED = np.array([[1, 1], [1j, -1j]], dtype=complex) / math.sqrt(2)
IM_GATE = IM_GATE_PRINTED.conj().T


@dataclass(frozen=True)
class OverlapEstimate:
    """value plus the raw ancilla probabilities it was decoded from.

    ``probs`` maps component name -> P(ancilla outcome); ``prob_stderr`` the
    Bernoulli standard error of each; ``stderr`` the standard error of the
    decoded value per component.
    """

    value: complex
    mode: str
    shots: int
    probs: dict
    prob_stderr: dict
    stderr: dict
    exact_probs: dict

    @property
    def total_shots(self) -> int:
        return self.shots * len(self.probs)


def _check_mode(mode: str, shots):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if mode == "shots" and (shots is None or int(shots) < 1):
        raise ValueError("shot mode needs shots >= 1")


def _estimate(p_exact: float, mode: str, shots, seed, key: int):
    if mode == "exact":
        return p_exact, 0.0
    _, est, se = qcore.sample_bernoulli(p_exact, shots, qcore.derive_seed(seed, key))
    return est, se


def modified_swap_probability(amp_a, amp_b, zeta) -> float:
    """P(ancilla = 1) for (1/sqrt 2)(|0>|a> + zeta|1>|b>) followed by H."""
    a = np.asarray(amp_a, dtype=complex)
    b = np.asarray(amp_b, dtype=complex)
    d = a.size
    lay = qcore.RegisterLayout((2, d))
    v = np.concatenate([a, zeta * b]) / math.sqrt(2)
    v = qcore.apply_unitary(v, qcore.HADAMARD, [0], lay)
    return qcore.outcome_probability(v, qcore.basis_projector(1, 2), [0], lay)


def _source_unitary(src, operation):
    if getattr(src, "kind", "pure") != "pure":
        raise UnsupportedError("modified swap test needs pure sources; use kraus_inner_product",
                               module="swaptest", operation=operation,
                               precondition="pure sources")
    return np.asarray(src.unitary.mat) if hasattr(src, "unitary") else np.asarray(src)


def modified_swap_test(src_a, src_b, zeta=1, mode="exact", shots=None, seed=0, key=0):
    """Estimate Re<a|b> (zeta = 1) or Im<a|b> (zeta = i).

    The circuit applies |0><0| (x) U_a + |1><1| (x) U_b to
    (1/sqrt 2)(|0> + zeta|1>)|0> and a Hadamard on the ancilla;
    P1 = (1/2)(1 - Re(zeta <a|b>)).
    """
    _check_mode(mode, shots)
    zeta = complex(zeta)
    if abs(abs(zeta) - 1) > qcore.EXACT_TOL:
        raise ValueError("zeta must have unit modulus")
    ua = _source_unitary(src_a, "modified_swap_test")
    ub = _source_unitary(src_b, "modified_swap_test")
    if ua.shape != ub.shape:
        raise DimensionError("sources differ in dimension", module="swaptest",
                             operation="modified_swap_test")
    d = ua.shape[0]
    lay = qcore.RegisterLayout((2, d))
    v = qcore.tensor(np.array([1, zeta]) / math.sqrt(2), qcore.ket(0, d))
    v = qcore.apply_unitary(v, qcore.controlled([ua, ub]), [0, 1], lay)
    v = qcore.apply_unitary(v, qcore.HADAMARD, [0], lay)
    p_exact = qcore.outcome_probability(v, qcore.basis_projector(1, 2), [0], lay)
    p, se = _estimate(p_exact, mode, shots, seed, key)
    # Re(zeta w) = 1 - 2 P1; zeta = 1 gives Re w, zeta = i gives -Im w
    re_zw = 1 - 2 * p
    comp = re_zw if zeta == 1 else (-re_zw if zeta == 1j else re_zw)
    name = "re" if zeta == 1 else ("im" if zeta == 1j else "re_zeta")
    return OverlapEstimate(comp, mode, int(shots or 0), {name: p}, {name: se},
                           {name: 2 * se}, {name: p_exact})


def complex_overlap(src_a, src_b, mode="exact", shots=None, seed=0, key=0):
    """<a|b> from the zeta = 1 and zeta = i tests (independent shot streams)."""
    re = modified_swap_test(src_a, src_b, 1, mode, shots, seed, 2 * key)
    im = modified_swap_test(src_a, src_b, 1j, mode, shots, seed, 2 * key + 1)
    return OverlapEstimate(complex(re.value, im.value), mode, int(shots or 0),
                           {**re.probs, **im.probs}, {**re.prob_stderr, **im.prob_stderr},
                           {**re.stderr, **im.stderr}, {**re.exact_probs, **im.exact_probs})


def _as_density(x):
    if isinstance(x, qcore.PureState):
        return None, x.amps
    if isinstance(x, qcore.DensityMatrix):
        return x.mat, None
    arr = np.asarray(x, dtype=complex)
    return (arr, None) if arr.ndim == 2 else (None, arr)


def _swap_matrix(d: int) -> np.ndarray:
    s = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            s[j * d + i, i * d + j] = 1.0
    return s


def standard_swap_test(a, b, mode="exact", shots=None, seed=0, key=0):
    """Estimate tr(rho_a rho_b) from P0 = (1/2)(1 + tr(rho_a rho_b)).

    Pure inputs run as statevectors; a mixed input switches the whole
    circuit to density matrices.
    """
    _check_mode(mode, shots)
    rho_a, psi_a = _as_density(a)
    rho_b, psi_b = _as_density(b)
    da = (psi_a if rho_a is None else rho_a).shape[0]
    db = (psi_b if rho_b is None else rho_b).shape[0]
    if da != db:
        raise DimensionError("swap test inputs differ in dimension", module="swaptest",
                             operation="standard_swap_test")
    d = da
    lay = qcore.RegisterLayout((2, d, d))
    cswap = qcore.controlled([np.eye(d * d), _swap_matrix(d)])
    plus = qcore.HADAMARD[:, 0]
    if rho_a is None and rho_b is None:
        state = qcore.tensor(plus, psi_a, psi_b)
    else:
        ra = np.outer(psi_a, psi_a.conj()) if rho_a is None else rho_a
        rb = np.outer(psi_b, psi_b.conj()) if rho_b is None else rho_b
        state = qcore.tensor(np.outer(plus, plus.conj()), ra, rb)
    state = qcore.apply_unitary(state, cswap, [0, 1, 2], lay)
    state = qcore.apply_unitary(state, qcore.HADAMARD, [0], lay)
    p_exact = qcore.outcome_probability(state, qcore.basis_projector(0, 2), [0], lay)
    p, se = _estimate(p_exact, mode, shots, seed, key)
    return OverlapEstimate(2 * p - 1, mode, int(shots or 0), {"pass": p}, {"pass": se},
                           {"pass": 2 * se}, {"pass": p_exact})


def interferometer_kraus(ch_a, ch_b) -> tuple:
    """P_l = |0><0| (x) E_l^(B) + |1><1| (x) E_l^(A)."""
    ops_a = ch_a.ops if isinstance(ch_a, qcore.KrausChannel) else tuple(ch_a)
    ops_b = ch_b.ops if isinstance(ch_b, qcore.KrausChannel) else tuple(ch_b)
    if len(ops_a) != len(ops_b):
        raise DimensionError(f"Kraus counts differ ({len(ops_a)} vs {len(ops_b)}); pad first",
                             module="swaptest", operation="kraus_inner_product",
                             precondition="aligned Kraus counts")
    if ops_a[0].shape != ops_b[0].shape:
        raise DimensionError("channels differ in dimension", module="swaptest",
                             operation="kraus_inner_product")
    p0 = qcore.basis_projector(0, 2)
    p1 = qcore.basis_projector(1, 2)
    return tuple(np.kron(p0, eb) + np.kron(p1, ea) for ea, eb in zip(ops_a, ops_b))


def kraus_ancilla_probability(ch_a, ch_b, gate) -> float:
    """P(ancilla = 1) after the interferometric channel and ``gate`` on the ancilla."""
    ops = interferometer_kraus(ch_a, ch_b)
    qcore.check_completeness(ops, operation="kraus_inner_product")
    d = ops[0].shape[0] // 2
    lay = qcore.RegisterLayout((2, d))
    plus = qcore.HADAMARD[:, 0]
    rho = qcore.tensor(np.outer(plus, plus.conj()), qcore.basis_projector(0, d))
    rho = qcore.apply_channel(rho, ops, [0, 1], lay)
    rho = qcore.apply_unitary(rho, gate, [0], lay)
    return qcore.outcome_probability(rho, qcore.basis_projector(1, 2), [0], lay)


def kraus_inner_product(src_a, src_b, mode="exact", shots=None, seed=0, key=0):
    """Estimate <rho_A, rho_B> = sum_l <0|E_l^(A)dag E_l^(B)|0>.

    H on the ancilla gives P1 = (1/2)(1 - Re w). For Im the ancilla gate is
    the adjoint of (1/sqrt 2)[[1, 1], [i, -i]], giving P1 = (1/2)(1 + Im w);
    equivalently, a measurement in the basis that gate defines.
    """
    _check_mode(mode, shots)
    for s in (src_a, src_b):
        if getattr(s, "kind", "mixed") != "mixed":
            raise UnsupportedError("kraus_inner_product needs mixed sources; use "
                                   "modified_swap_test for pure ones", module="swaptest",
                                   operation="kraus_inner_product",
                                   precondition="mixed sources")
    ch_a = src_a.channel if hasattr(src_a, "channel") else src_a
    ch_b = src_b.channel if hasattr(src_b, "channel") else src_b
    pr_exact = kraus_ancilla_probability(ch_a, ch_b, qcore.HADAMARD)
    pi_exact = kraus_ancilla_probability(ch_a, ch_b, IM_GATE)
    pr, ser = _estimate(pr_exact, mode, shots, seed, 2 * key)
    pi, sei = _estimate(pi_exact, mode, shots, seed, 2 * key + 1)
    value = complex(1 - 2 * pr, 2 * pi - 1)
    return OverlapEstimate(value, mode, int(shots or 0), {"re": pr, "im": pi},
                           {"re": ser, "im": sei}, {"re": 2 * ser, "im": 2 * sei},
                           {"re": pr_exact, "im": pi_exact})
