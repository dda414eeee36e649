"""Hadamard-product Hamiltonian simulation with the modified swap S'.

S'|a, b, c> = delta_ac |b, a, b>. Conjugating rho1 (x) rho2 (x) sigma by
exp(-i S' dt) and tracing out the first two registers evolves sigma under
the generator rho1^T * rho2 (elementwise product) to first order in dt.

With rho1 = rho2 = K0/M the generator is K/M^2 = (K/M)/M, so evolving the
normalized kernel K/M for time t needs total generator time M t.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import qcore


@dataclass(frozen=True)
class SPrimeOperator:
    M: int
    mat: np.ndarray

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Sparse action on a vector (or the columns of a matrix) over M^3."""
        m = self.M
        t = np.asarray(v).reshape((m, m, m) + np.asarray(v).shape[1:])
        out = np.zeros_like(t)
        for j in range(m):
            for k in range(m):
                out[k, j, k] = t[j, k, j]
        return out.reshape(np.asarray(v).shape)


def build_sprime(m: int) -> SPrimeOperator:
    """Dense S' = sum_jk |k><j| (x) |j><k| (x) |k><j| over M^3."""
    if m < 2:
        raise ValueError("S' needs M >= 2")
    s = np.zeros((m ** 3, m ** 3), dtype=complex)
    for j in range(m):
        for k in range(m):
            s[(k * m + j) * m + k, (j * m + k) * m + j] = 1.0
    s.setflags(write=False)
    return SPrimeOperator(m, s)


@functools.lru_cache(maxsize=16)
def _sprime_eigh(m: int):
    w, v = np.linalg.eigh(build_sprime(m).mat)
    w.setflags(write=False)
    v.setflags(write=False)
    return w, v


def sprime_propagator(m: int, dt: float) -> np.ndarray:
    """exp(-i S' dt) from the cached eigendecomposition."""
    w, v = _sprime_eigh(m)
    return (v * np.exp(-1j * w * dt)) @ v.conj().T


def sprime_propagator_closed(m: int, dt: float) -> np.ndarray:
    """Same propagator from S'^3 = S': 1 - P + cos(dt) P - i sin(dt) S', P = S'^2."""
    s = build_sprime(m).mat
    p = s @ s
    return np.eye(m ** 3) - p + math.cos(dt) * p - 1j * math.sin(dt) * s


def hadamard_generator(rho1, rho2) -> np.ndarray:
    return np.asarray(rho1).T * np.asarray(rho2)


@dataclass(frozen=True)
class EvolutionStepReport:
    dt: float
    output: np.ndarray
    predicted: np.ndarray
    generator: np.ndarray
    deviation: float


def _step(rho1, rho2, sigma, dt):
    m = np.asarray(sigma).shape[0]
    u = sprime_propagator(m, dt)
    big = qcore.tensor(rho1, rho2, sigma)
    big = u @ big @ u.conj().T
    return qcore.partial_trace(big, (m, m, m), [2])


def evolution_step(rho1, rho2, sigma, dt: float) -> EvolutionStepReport:
    """One conjugation by exp(-i S' dt) against the first-order prediction.

    ``deviation`` is the Frobenius norm of output minus
    sigma - i dt [rho1^T * rho2, sigma].
    """
    rho1, rho2, sigma = (np.asarray(x, dtype=complex) for x in (rho1, rho2, sigma))
    m = sigma.shape[0]
    if rho1.shape != (m, m) or rho2.shape != (m, m):
        raise ValueError("rho1, rho2 and sigma must share one dimension")
    if dt <= 0:
        raise ValueError("dt must be positive")
    out = _step(rho1, rho2, sigma, dt)
    gen = hadamard_generator(rho1, rho2)
    pred = sigma - 1j * dt * (gen @ sigma - sigma @ gen)
    return EvolutionStepReport(dt, out, pred, gen, float(np.linalg.norm(out - pred)))


def kernel_from_overlap(k0_density) -> np.ndarray:
    """K/M from the density matrix K0/M: M (K0/M)^T * (K0/M)."""
    k0 = np.asarray(k0_density)
    return k0.shape[0] * hadamard_generator(k0, k0)


def simulate_exp_k(k0_density, sigma, t: float, n: int) -> np.ndarray:
    """Approximate exp(-i (K/M) t) sigma exp(i (K/M) t) with n S' steps.

    Each step consumes a fresh pair K0/M (x) K0/M and runs for M t / n.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    k0 = np.asarray(k0_density, dtype=complex)
    m = k0.shape[0]
    out = np.asarray(sigma, dtype=complex)
    if t == 0:
        return out.copy()
    dt = m * t / n
    u = sprime_propagator(m, dt)
    pair = np.kron(k0, k0)
    for _ in range(n):
        big = u @ np.kron(pair, out) @ u.conj().T
        out = qcore.partial_trace(big, (m, m, m), [2])
    return out


def exact_exp_k(k0_density, sigma, t: float) -> np.ndarray:
    kern = kernel_from_overlap(k0_density)
    u = scipy.linalg.expm(-1j * kern * t)
    return u @ np.asarray(sigma) @ u.conj().T


def coherence_operator(k0_density, dt: float) -> np.ndarray:
    """W(dt) = tr_12[exp(-i S' dt)(K0/M (x) K0/M (x) 1)].

    The step channel sends an off-diagonal block X (evolved branch against an
    idle branch) to W X, so W(dt)^n is the operator the S' simulation
    applies to a coherently controlled register. W = 1 - i dt (K/M^2) + O(dt^2).
    """
    k0 = np.asarray(k0_density, dtype=complex)
    m = k0.shape[0]
    u = sprime_propagator(m, dt)
    return qcore.partial_trace(u @ qcore.tensor(k0, k0, np.eye(m)), (m, m, m), [2])


def simulated_evolution_operator(k0_density, t: float, n: int) -> np.ndarray:
    """W(M t/n)^n, the S'-simulation stand-in for exp(-i (K/M) t); t may be negative."""
    m = np.asarray(k0_density).shape[0]
    return np.linalg.matrix_power(coherence_operator(k0_density, m * t / n), n)
