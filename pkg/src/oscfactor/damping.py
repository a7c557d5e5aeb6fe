"""Gaussian treatment of oscillator-3 amplitude damping.

Each register pair (n, m) pins oscillator 3 to a coherent state rotating
at its own rate, and a linear bath keeps it Gaussian: a damped coherent
amplitude on top of a growing thermal halo. Two numbers per pair describe
everything, so the dissipative protocol costs barely more than the
unitary one.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .analytic import ThermalEnsemble, _rotation_from_product
from .model import SystemParams
from .stateprep import mean_occupation


@dataclass(frozen=True)
class BathSpec:
    """Markovian bath couplings; only oscillator 3 may be lossy."""

    gamma3: float = 0.0
    nbar3: float = 0.0
    gamma1: float = 0.0
    gamma2: float = 0.0
    nbar1: float = 0.0
    nbar2: float = 0.0

    def __post_init__(self):
        if self.gamma1 != 0.0 or self.gamma2 != 0.0 or self.nbar1 != 0.0 or self.nbar2 != 0.0:
            raise ValueError("register baths are not supported: gamma1, gamma2, "
                             "nbar1, nbar2 must all be zero")
        if self.gamma3 < 0.0:
            raise ValueError("gamma3 must be non-negative")
        if self.nbar3 < 0.0:
            raise ValueError("nbar3 must be non-negative")

    @classmethod
    def from_thermal(cls, gamma3: float, omega3: float, temperature: float) -> "BathSpec":
        """Bath at the same temperature the registers were prepared at."""
        return cls(gamma3=gamma3, nbar3=mean_occupation(omega3, temperature))


class DampedGaussianState(NamedTuple):
    """Displaced thermal state of one mode: amplitude mu, thermal excess nu."""

    mu: complex
    nu: float


class DissipativeFidelity(NamedTuple):
    fidelity: float
    born_probability: float


def damped_trajectory(alpha: complex, omega: float, gamma: float, nbar: float,
                      tau: float) -> DampedGaussianState:
    """State of a mode started in |alpha> after time tau of rotation and damping."""
    if gamma < 0.0 or nbar < 0.0 or tau < 0.0:
        raise ValueError("gamma, nbar and tau must be non-negative")
    decay = np.exp(-gamma * tau)
    mu = alpha * np.exp(-(1j * omega + 0.5 * gamma) * tau)
    nu = nbar * (1.0 - decay)
    return DampedGaussianState(mu=complex(mu), nu=float(nu))


def damped_step(state: DampedGaussianState, omega: float, gamma: float, nbar: float,
                tau: float) -> DampedGaussianState:
    """Continues a trajectory for another tau; composes as a semigroup."""
    decay = np.exp(-gamma * tau)
    mu = state.mu * np.exp(-(1j * omega + 0.5 * gamma) * tau)
    nu = state.nu * decay + nbar * (1.0 - decay)
    return DampedGaussianState(mu=complex(mu), nu=float(nu))


def q_overlap(state: DampedGaussianState, beta: complex) -> float:
    """Overlap density <beta| rho |beta> / pi ... times pi.

    For a displaced thermal state this is exp(-|beta - mu|^2 / (1 + nu)) / (1 + nu);
    it reduces to |<beta|mu>|^2 when nu = 0.
    """
    if state.nu < 0.0:
        raise ValueError("nu must be non-negative")
    width = 1.0 + state.nu
    return float(np.exp(-abs(beta - state.mu) ** 2 / width) / width)


def _probe_amplitude(alpha: complex, omega_target: float, bath: BathSpec,
                     tau: float, probe: str) -> complex:
    if probe == "damped":
        return alpha * complex(np.exp(-(1j * omega_target + 0.5 * bath.gamma3) * tau))
    if probe == "lossless":
        return alpha * complex(np.exp(-1j * omega_target * tau))
    raise ValueError(f"unknown probe {probe!r}, expected 'damped' or 'lossless'")


def dissipative_values(ensemble: ThermalEnsemble, bath: BathSpec, tau_grid,
                       probe: str = "damped") -> tuple[np.ndarray, np.ndarray]:
    """Fidelity and Born weight on a tau grid under oscillator-3 damping.

    The probe tracks the factor trajectory: by default it damps along with
    the signal, otherwise it follows the lossless rotation.
    """
    tau_grid = np.atleast_1d(np.asarray(tau_grid, dtype=float))
    if np.any(tau_grid < 0.0):
        raise ValueError("tau must be non-negative")
    omega_target = _rotation_from_product(ensemble.params, ensemble.N)
    rates = omega_target - ensemble._flat_deltas
    masses = ensemble._flat_masses
    factor = ensemble.factor_mask.reshape(-1)
    alpha = ensemble.alpha
    g3, nb3 = bath.gamma3, bath.nbar3
    fid = np.empty(tau_grid.shape)
    born = np.empty(tau_grid.shape)
    for lo in range(0, len(tau_grid), 256):
        taus = tau_grid[lo:lo + 256, None]
        mu = alpha * np.exp(-(1j * rates[None, :] + 0.5 * g3) * taus)
        nu = nb3 * (1.0 - np.exp(-g3 * taus))
        width = 1.0 + nu
        beta = np.array([_probe_amplitude(alpha, omega_target, bath, float(t), probe)
                         for t in taus[:, 0]])[:, None]
        q = np.exp(-np.abs(beta - mu) ** 2 / width) / width
        weighted = q * masses[None, :]
        born[lo:lo + 256] = np.sum(weighted, axis=1)
        fid[lo:lo + 256] = np.sum(weighted[:, factor], axis=1)
    if np.any(born <= 0.0):
        raise ValueError("vanishing born probability under dissipation")
    return fid / born, born


def dissipative_thermal_fidelity(params: SystemParams, thermal, N: int, alpha: complex,
                                 bath: BathSpec, tau: float, mode: str = "trial-window",
                                 probe: str = "damped") -> DissipativeFidelity:
    """Closed-form fidelity with oscillator-3 damping folded in.

    At gamma3 = 0 this reproduces the unitary closed form exactly.
    """
    ensemble = ThermalEnsemble(params, thermal, N, alpha, mode)
    fid, born = dissipative_values(ensemble, bath, np.array([tau]), probe)
    return DissipativeFidelity(fidelity=float(fid[0]), born_probability=float(born[0]))
