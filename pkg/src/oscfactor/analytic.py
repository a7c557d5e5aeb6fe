"""Closed-form engine: free evolution, conditional measurement, fidelities.

The coupling Hamiltonian is diagonal in the register number basis, so the
third oscillator's state conditioned on registers holding (n, m) is always
a coherent state rotating at a product-dependent rate. Everything the
protocol needs follows from exact arithmetic in (n, m) index space; no
three-mode matrices are ever built here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    JointState12,
    SystemParams,
    TrialWindow,
    VanishingNormError,
    factor_pairs_in_window,
    standard_trial_window,
)
from .stateprep import ThermalSpec, WINDOW_MODES, build_thermal_joint


class NoFactorsError(ValueError):
    """No factor pair of N carries weight inside the window."""


def rotation_frequency(params: SystemParams, n: int, m: int) -> float:
    """Phase-space rotation rate of oscillator 3 given registers in (n, m)."""
    if n < 0 or m < 0:
        raise ValueError("occupations must be non-negative")
    return _rotation_from_product(params, int(n) * int(m))


def _rotation_from_product(params: SystemParams, product: int) -> float:
    value = params.omega3
    for k, g in params.couplings:
        term = product**k  # exact integer power before any float conversion
        if term > 1.7976931348623157e308:
            raise OverflowError(f"(n*m)**k = {term} exceeds the floating-point range")
        value += g * float(term)
    return value


def coherent_overlap(alpha: complex, omega_ref: float, omega_nm: float, tau: float) -> complex:
    """Overlap of two coherent states rotated from alpha for time tau.

    Returns exp(-|alpha|^2 (1 - e^{i (omega_ref - omega_nm) tau})), whose
    modulus is exp(-|alpha|^2 (1 - cos(delta tau))).
    """
    delta = omega_ref - omega_nm
    a2 = abs(alpha) ** 2
    return complex(np.exp(-a2 * (1.0 - np.exp(1j * delta * tau))))


def evolved_phase_factor(n: int, n_prime: int, m: int, m_prime: int,
                         params: SystemParams, tau: float) -> complex:
    """Free-evolution phase picked up by the (n,m),(n',m') matrix element."""
    angle = ((n_prime - n) * params.omega1 + (m_prime - m) * params.omega2) * tau
    return complex(np.exp(1j * angle))


def _delta_table(params: SystemParams, window: TrialWindow, N: int) -> np.ndarray:
    """Rotation-rate gaps Omega_N - Omega_nm over the window, exact in the integers."""
    idx = [int(v) for v in window.indices()]
    table = np.empty((len(idx), len(idx)))
    for i, n in enumerate(idx):
        for j, m in enumerate(idx):
            acc = 0.0
            for k, g in params.couplings:
                # difference of exact integer powers, converted to float once
                acc += g * float(N**k - (n * m) ** k)
            table[i, j] = acc
    return table


def _register_phases(params: SystemParams, window: TrialWindow, tau: float) -> np.ndarray:
    """Per-pair free-evolution phases e^{i (n omega1 + m omega2) tau}, flattened."""
    n = window.indices().astype(float)
    angles = np.add.outer(n * params.omega1, n * params.omega2) * tau
    return np.exp(1j * angles).reshape(-1)


def _factor_mask(window: TrialWindow, N: int, trial: TrialWindow | None) -> np.ndarray:
    """Boolean (W, W) mask of factor pairs inside the trial range."""
    search = window if trial is None else window.intersect(trial)
    mask = np.zeros((window.size, window.size), dtype=bool)
    for r, s in factor_pairs_in_window(N, search):
        mask[r - window.n_min, s - window.n_min] = True
    return mask


def free_evolution(state: JointState12, params: SystemParams, tau: float) -> JointState12:
    """Applies the register free-evolution phases; diagonal states are unchanged."""
    if state.diagonal:
        return state
    v = _register_phases(params, state.window, tau)
    evolved = state.weights * np.outer(v.conj(), v)
    return JointState12(state.window, evolved, diagonal=False,
                        trace_deficit_flag=state.trace_deficit_flag)


@dataclass(frozen=True)
class ConditionalResult:
    """Registers' reduced state after post-selecting oscillator 3."""

    rho_r: JointState12
    born_probability: float
    ideal_probability: float
    tau: float


@dataclass(frozen=True)
class FactorState:
    """Target state: the input restricted to factor pairs of N."""

    rho_f: JointState12
    A_f: float


def conditional_reduction(state: JointState12, alpha: complex, params: SystemParams,
                          N: int, tau: float,
                          trial: TrialWindow | None = None) -> ConditionalResult:
    """Conditional measurement of oscillator 3 onto its factor trajectory.

    The reduced register state picks up one overlap coefficient per side,
    a congruence by a diagonal matrix, so Hermiticity and positivity are
    preserved exactly. born_probability is the actual Born weight of the
    outcome; ideal_probability is the bare weight the preparation put on
    factor pairs inside the trial range (time independent).
    """
    if trial is None:
        trial = standard_trial_window(N)
    window = state.window
    deltas = _delta_table(params, window, N)
    a2 = abs(alpha) ** 2
    eps = np.exp(-a2 * (1.0 - np.exp(1j * deltas * tau)))
    eps_sq = np.exp(-2.0 * a2 * (1.0 - np.cos(deltas * tau)))
    pops = state.populations()
    A = float(np.sum(pops * eps_sq))
    if A < 1e-30:
        raise VanishingNormError(f"vanishing norm: born probability {A!r}")
    ideal = float(np.sum(pops[_factor_mask(window, N, trial)]))
    if state.diagonal:
        reduced = JointState12(window, pops * eps_sq / A, diagonal=True)
    else:
        u = eps.reshape(-1) * _register_phases(params, window, tau).conj()
        reduced = JointState12(window, state.weights * np.outer(u, u.conj()) / A,
                               diagonal=False)
    return ConditionalResult(rho_r=reduced, born_probability=A,
                             ideal_probability=ideal, tau=tau)


def factor_target_state(state: JointState12, N: int,
                        trial: TrialWindow | None = None) -> FactorState:
    """Restriction of the state to pairs multiplying to N, renormalized.

    Hand this the free-evolved state when coherences matter; diagonal
    states need no evolution.
    """
    if trial is None:
        trial = standard_trial_window(N)
    mask = _factor_mask(state.window, N, trial)
    pops = state.populations()
    A_f = float(np.sum(pops[mask]))
    if not mask.any() or A_f <= 0.0:
        raise NoFactorsError(f"no factors in window for N={N}")
    if state.diagonal:
        table = np.where(mask, pops, 0.0) / A_f
        return FactorState(JointState12(state.window, table, diagonal=True), A_f)
    keep = mask.reshape(-1)
    projected = np.where(np.outer(keep, keep), state.weights, 0.0) / A_f
    return FactorState(JointState12(state.window, projected, diagonal=False), A_f)


def _as_pair_matrix(rho) -> np.ndarray:
    if isinstance(rho, JointState12):
        return rho.pair_matrix()
    return np.asarray(rho, dtype=complex)


def _check_density_matrix(mat: np.ndarray, tol: float = 1e-8) -> None:
    if float(np.abs(mat - mat.conj().T).max()) > tol:
        raise ValueError("input is not Hermitian")
    eigs = np.linalg.eigvalsh(mat)
    if float(eigs.min()) < -tol:
        raise ValueError("input is not positive semidefinite")
    if abs(float(np.trace(mat).real) - 1.0) > tol:
        raise ValueError("input trace differs from one")


def uhlmann_fidelity(rho_a, rho_b) -> float:
    """Mixed-state fidelity (tr sqrt(sqrt(a) b sqrt(a)))^2.

    Accepts JointState12 values or plain Hermitian matrices. Computed by
    Hermitian eigendecomposition with negative eigenvalues within roundoff
    clamped to zero; diagonal inputs over very large windows use the
    equivalent classical formula instead of materializing the matrix.
    """
    if (isinstance(rho_a, JointState12) and isinstance(rho_b, JointState12)
            and rho_a.diagonal and rho_b.diagonal and rho_a.pair_count > 400):
        pa = np.clip(rho_a.populations(), 0.0, None)
        pb = np.clip(rho_b.populations(), 0.0, None)
        for p in (pa, pb):
            if abs(float(p.sum()) - 1.0) > 1e-8:
                raise ValueError("input trace differs from one")
        return float(np.sum(np.sqrt(pa * pb))) ** 2
    a = _as_pair_matrix(rho_a)
    b = _as_pair_matrix(rho_b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    _check_density_matrix(a)
    _check_density_matrix(b)
    vals, vecs = np.linalg.eigh(a)
    root_a = (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.conj().T
    inner = root_a @ b @ root_a
    sing = np.linalg.eigvalsh(inner)
    return float(np.sum(np.sqrt(np.clip(sing, 0.0, None)))) ** 2


def trace_distance(rho_a, rho_b) -> float:
    """Half the trace norm of the difference."""
    if (isinstance(rho_a, JointState12) and isinstance(rho_b, JointState12)
            and rho_a.diagonal and rho_b.diagonal):
        return 0.5 * float(np.abs(rho_a.populations() - rho_b.populations()).sum())
    diff = _as_pair_matrix(rho_a) - _as_pair_matrix(rho_b)
    return 0.5 * float(np.abs(np.linalg.eigvalsh(diff)).sum())


class ThermalEnsemble:
    """Precomputed diagonal thermal run context.

    Bundles the window, joint weights, rotation-rate gaps and the factor
    mass so fidelity curves evaluate as single vectorized expressions.
    Reductions are fixed-order pairwise sums, so results do not depend on
    evaluation order or thread count.
    """

    def __init__(self, params: SystemParams, thermal: ThermalSpec, N: int,
                 alpha: complex, mode: str = "trial-window",
                 trial: TrialWindow | None = None):
        if mode not in WINDOW_MODES:
            raise ValueError(f"unknown window mode {mode!r}, expected one of {WINDOW_MODES}")
        self.params = params
        self.thermal = thermal
        self.N = int(N)
        self.alpha = complex(alpha)
        self.mode = mode
        self.state = build_thermal_joint(params, thermal, mode, N)
        if trial is not None:
            # explicit override restricts both support and the factor range
            self.state = _restrict_to(self.state, trial, renormalize=(mode == "trial-window"))
        self.window = self.state.window
        self.masses = self.state.populations()
        self.deltas = _delta_table(params, self.window, self.N)
        # factors are searched in the trial range even on full support:
        # a stray (1, N) pair is not a usable factorization
        self.factor_mask = _factor_mask(self.window, self.N,
                                        trial if trial is not None
                                        else standard_trial_window(self.N))
        self.A_f = float(np.sum(self.masses[self.factor_mask]))
        self.trace = self.state.trace()
        self._flat_masses = self.masses.reshape(-1)
        self._flat_deltas = self.deltas.reshape(-1)

    @property
    def ideal_probability(self) -> float:
        return self.A_f

    def suppression(self, tau_grid: np.ndarray) -> np.ndarray:
        """|overlap|^2 per (tau, pair), shape (len(grid), pairs)."""
        a2 = abs(self.alpha) ** 2
        phases = np.outer(np.atleast_1d(tau_grid), self._flat_deltas)
        return np.exp(-2.0 * a2 * (1.0 - np.cos(phases)))

    def born_values(self, tau_grid) -> np.ndarray:
        tau_grid = np.atleast_1d(np.asarray(tau_grid, dtype=float))
        out = np.empty(tau_grid.shape)
        for lo in range(0, len(tau_grid), 1024):
            chunk = tau_grid[lo:lo + 1024]
            out[lo:lo + 1024] = np.sum(self.suppression(chunk) * self._flat_masses, axis=1)
        return out

    def values(self, tau_grid) -> np.ndarray:
        """Closed-form fidelity on a tau grid."""
        if self.A_f <= 0.0:
            raise NoFactorsError(f"no factors in window for N={self.N}")
        return self.A_f / self.born_values(tau_grid)

    def fidelity(self, tau: float) -> float:
        return float(self.values(np.array([tau]))[0])

    def born(self, tau: float) -> float:
        return float(self.born_values(np.array([tau]))[0])


def _restrict_to(state: JointState12, trial: TrialWindow, renormalize: bool) -> JointState12:
    window = state.window.intersect(trial)
    if not window.is_valid():
        raise ValueError(f"window [{trial.n_min}, {trial.n_max}] leaves no support")
    lo = window.n_min - state.window.n_min
    hi = lo + window.size
    table = state.populations()[lo:hi, lo:hi].copy()
    if renormalize:
        table /= table.sum()
        return JointState12(window, table, diagonal=True)
    return JointState12(window, table, diagonal=True, trace_deficit_flag=True)


def thermal_fidelity_closed_form(params: SystemParams, thermal: ThermalSpec, N: int,
                                 alpha: complex, tau: float,
                                 mode: str = "trial-window") -> float:
    """Closed-form fidelity between the reduced state and the factor target.

    Equals uhlmann_fidelity(rho_f, rho_r) for thermal input; evaluated
    directly from the weights with no matrix construction.
    """
    return ThermalEnsemble(params, thermal, N, alpha, mode).fidelity(tau)
