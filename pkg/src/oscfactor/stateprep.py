"""Initial joint states for the two trial-factor registers."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import JointState12, StateValidationError, SystemParams, TrialWindow, standard_trial_window

WINDOW_MODES = ("full-support", "trial-window")


@dataclass(frozen=True)
class ThermalSpec:
    """Bose-Einstein occupation statistics at temperature T.

    T is in units of (hbar * omega3 / k_B). tail_cutoff bounds the joint
    probability mass allowed to fall outside a full-support truncation.
    """

    temperature: float = 3.0
    tail_cutoff: float = 1e-12

    def __post_init__(self):
        if self.temperature <= 0.0:
            raise ValueError(f"temperature must be positive, got {self.temperature!r}")
        if not 0.0 < self.tail_cutoff <= 1e-6:
            raise ValueError(f"tail_cutoff must lie in (0, 1e-6], got {self.tail_cutoff!r}")


def thermal_probability(omega_j: float, T: float, n: int) -> float:
    """Occupation probability (1 - e^{-omega/T}) e^{-n omega/T}."""
    if T <= 0.0:
        raise ValueError(f"temperature must be positive, got {T!r}")
    if omega_j <= 0.0:
        raise ValueError(f"frequency must be positive, got {omega_j!r}")
    if n < 0:
        raise ValueError(f"occupation must be non-negative, got {n!r}")
    x = math.exp(-omega_j / T)
    return (1.0 - x) * x**n


def mean_occupation(omega_j: float, T: float) -> float:
    """Mean excitation 1 / (e^{omega/T} - 1) of a thermal oscillator."""
    if T <= 0.0:
        raise ValueError(f"temperature must be positive, got {T!r}")
    if omega_j <= 0.0:
        raise ValueError(f"frequency must be positive, got {omega_j!r}")
    return 1.0 / math.expm1(omega_j / T)


def full_support_n_max(params: SystemParams, spec: ThermalSpec) -> int:
    """Adaptive truncation level for full-support thermal states.

    Smallest n such that each register's geometric tail mass beyond n is
    below tail_cutoff / 2, so the omitted joint mass stays below the cutoff.
    """
    n_max = 1
    for omega in (params.omega1, params.omega2):
        x = math.exp(-omega / spec.temperature)
        # tail mass strictly beyond n is x^(n+1)
        n = math.ceil(math.log(spec.tail_cutoff / 2.0) / math.log(x) - 1.0)
        n_max = max(n_max, n)
    return n_max


def _thermal_vector(omega: float, T: float, window: TrialWindow) -> np.ndarray:
    n = window.indices()
    x = math.exp(-omega / T)
    return (1.0 - x) * x**n.astype(float)


def build_thermal_joint(params: SystemParams, spec: ThermalSpec, mode: str, N: int) -> JointState12:
    """Product thermal state of the two registers.

    In "full-support" mode the window is [0, n_max*] with raw weights and
    trace_deficit_flag set: the stored mass is what the truncated
    distribution actually carries, which is what downstream detection
    probabilities are quoted against. In "trial-window" mode the window is
    the candidate-factor range [2, ceil(N/2)] and weights are renormalized
    to trace one.
    """
    if mode not in WINDOW_MODES:
        raise ValueError(f"unknown window mode {mode!r}, expected one of {WINDOW_MODES}")
    if mode == "full-support":
        window = TrialWindow(0, full_support_n_max(params, spec))
    else:
        window = standard_trial_window(N)
    p1 = _thermal_vector(params.omega1, spec.temperature, window)
    p2 = _thermal_vector(params.omega2, spec.temperature, window)
    table = np.outer(p1, p2)
    if mode == "trial-window":
        table = table / table.sum()
        return JointState12(window, table, diagonal=True, trace_deficit_flag=False)
    return JointState12(window, table, diagonal=True, trace_deficit_flag=True)


def build_uniform_joint(window: TrialWindow) -> JointState12:
    """Equal weight on every (n, m) pair in the window."""
    if not window.is_valid():
        raise ValueError(f"invalid window [{window.n_min}, {window.n_max}]")
    w = window.size
    table = np.full((w, w), 1.0 / (w * w))
    return JointState12(window, table, diagonal=True)


def build_custom_joint(window: TrialWindow, weights: np.ndarray) -> JointState12:
    """General (possibly coherent) joint state from a pair-indexed matrix.

    Accepts either a (W, W) real population table for a diagonal state or
    the full (W^2, W^2) Hermitian matrix, basis pairs row-major in (n, m).
    Invalid input is rejected with the violated invariant named.
    """
    if not window.is_valid():
        raise ValueError(f"invalid window [{window.n_min}, {window.n_max}]")
    weights = np.asarray(weights)
    w = window.size
    if weights.shape == (w, w) and not np.iscomplexobj(weights):
        state = JointState12(window, weights.astype(float), diagonal=True)
    elif weights.shape == (w * w, w * w):
        state = JointState12(window, weights.astype(complex), diagonal=False)
    else:
        raise StateValidationError(
            f"weights shape {weights.shape} matches neither ({w}, {w}) nor ({w * w}, {w * w})")
    return state.require_valid()
