"""Brute-force Fock-space oracle for the closed-form engines.

Everything here is computed from truncated number-basis matrices and a
fixed-step integrator, sharing no formulas with the analytic modules. It
exists to be slow and obviously correct; production code should never
call it on a hot path.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.linalg import expm


class InsufficientDimensionError(ValueError):
    """Fock truncation leaves more than the allowed probability behind."""


def default_dimension(alpha: complex) -> int:
    """Truncation comfortably past the coherent bulk at |alpha|^2 + 6 |alpha|."""
    a = abs(alpha)
    return math.ceil(a * a + 6.0 * a) + 10


def coherent_fock_vector(alpha: complex, dim: int | None = None) -> np.ndarray:
    """Number-basis coefficients of |alpha>, by the stable ratio recurrence."""
    if dim is None:
        dim = default_dimension(alpha)
    if dim < 1:
        raise ValueError("dim must be at least 1")
    c = np.empty(dim, dtype=complex)
    c[0] = math.exp(-0.5 * abs(alpha) ** 2)
    for n in range(1, dim):
        c[n] = c[n - 1] * alpha / math.sqrt(n)
    deficit = 1.0 - float(np.vdot(c, c).real)
    if deficit > 1e-8:
        raise InsufficientDimensionError(
            f"insufficient dimension: {dim} levels leave {deficit:.3e} unaccounted")
    return c


def unitary_overlap_oracle(alpha: complex, omega_ref: float, omega_nm: float,
                           tau: float, dim: int | None = None) -> complex:
    """<alpha e^{-i omega_ref tau} | alpha e^{-i omega_nm tau}> summed level by level."""
    c = coherent_fock_vector(alpha, dim)
    n = np.arange(len(c))
    ref = c * np.exp(-1j * omega_ref * n * tau)
    sig = c * np.exp(-1j * omega_nm * n * tau)
    return complex(np.vdot(ref, sig))


def _rhs(rho: np.ndarray, omega: float, gamma: float, nbar: float,
         gaps: np.ndarray, lower: np.ndarray, raise_: np.ndarray,
         total: np.ndarray) -> np.ndarray:
    # all terms are elementwise or index shifts; no matrix products
    out = (-1j * omega) * gaps * rho
    if gamma > 0.0:
        down = np.zeros_like(rho)
        down[:-1, :-1] = rho[1:, 1:] * lower
        out += gamma * (nbar + 1.0) * (down - 0.5 * total * rho)
        if nbar > 0.0:
            up = np.zeros_like(rho)
            up[1:, 1:] = rho[:-1, :-1] * raise_
            out += gamma * nbar * (up - 0.5 * (total + 2.0) * rho)
    return out


def lindblad_rk4_evolve(rho0: np.ndarray, omega: float, gamma: float, nbar: float,
                        tau: float, dt: float | None = None) -> np.ndarray:
    """Evolves one damped mode, rho' = -i[w n, rho] + dissipator, by fixed-step RK4.

    The state is re-Hermitized every step. Trace drift beyond 1e-8 per unit
    time means the step was too large for the requested rates.
    """
    rho = np.array(rho0, dtype=complex)
    d = rho.shape[0]
    if rho.shape != (d, d):
        raise ValueError("rho0 must be square")
    if tau < 0.0:
        raise ValueError("tau must be non-negative")
    rate = max(1.0, abs(omega), gamma * (nbar + 1.0))
    if dt is None:
        dt = 1e-3 / rate
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    steps = max(1, math.ceil(tau / dt))
    h = tau / steps
    n = np.arange(d, dtype=float)
    gaps = np.subtract.outer(n, n)
    total = np.add.outer(n, n)
    lower = np.sqrt(np.outer(n + 1.0, n + 1.0))[: d - 1, : d - 1]
    raise_ = np.sqrt(np.outer(n[1:], n[1:]))
    trace0 = float(np.trace(rho).real)
    for _ in range(steps):
        k1 = _rhs(rho, omega, gamma, nbar, gaps, lower, raise_, total)
        k2 = _rhs(rho + 0.5 * h * k1, omega, gamma, nbar, gaps, lower, raise_, total)
        k3 = _rhs(rho + 0.5 * h * k2, omega, gamma, nbar, gaps, lower, raise_, total)
        k4 = _rhs(rho + h * k3, omega, gamma, nbar, gaps, lower, raise_, total)
        rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        rho = 0.5 * (rho + rho.conj().T)
    drift = abs(float(np.trace(rho).real) - trace0)
    if drift > 1e-8 * max(tau, 1e-12):
        raise RuntimeError(f"step too large: trace drifted by {drift:.3e} over tau={tau}")
    return rho


def thermal_fock_matrix(nu: float, dim: int) -> np.ndarray:
    """Thermal state with mean occupation nu, truncated to dim levels."""
    if nu < 0.0:
        raise ValueError("nu must be non-negative")
    if nu == 0.0:
        w = np.zeros(dim)
        w[0] = 1.0
    else:
        n = np.arange(dim, dtype=float)
        w = np.exp(n * math.log(nu / (1.0 + nu))) / (1.0 + nu)
    return np.diag(w).astype(complex)


def reconstruct_gaussian(mu: complex, nu: float, dim: int) -> np.ndarray:
    """Displaced thermal matrix D(mu) rho_th(nu) D(mu)^dagger in Fock space."""
    n = np.arange(1, dim, dtype=float)
    a = np.diag(np.sqrt(n), k=1)
    disp = expm(mu * a.conj().T - np.conj(mu) * a)
    return disp @ thermal_fock_matrix(nu, dim) @ disp.conj().T


def fock_trace_distance(rho_a: np.ndarray, rho_b: np.ndarray) -> float:
    """Half the trace norm of the difference, straight from eigenvalues."""
    diff = np.asarray(rho_a, dtype=complex) - np.asarray(rho_b, dtype=complex)
    return 0.5 * float(np.abs(np.linalg.eigvalsh(diff)).sum())
