"""Domain types shared by the whole simulator.

Unit conventions: hbar = 1 and the third oscillator's frequency sets the
scale (omega3 = 1 by default), so all frequencies are dimensionless
multiples of omega3 and all times are the dimensionless tau = omega3 * t.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

HBAR = 1.0


class StateValidationError(ValueError):
    """A joint-state matrix violates a structural invariant."""


class VanishingNormError(ValueError):
    """A conditional measurement outcome has numerically zero probability."""


@dataclass(frozen=True)
class SystemParams:
    """Oscillator frequencies plus the nonlinear couplings.

    couplings is an ordered tuple of (order k, strength g_k); the coupling
    term conditioned on registers holding (n, m) shifts the third
    oscillator's rotation rate by sum_k g_k * (n*m)**k.
    """

    omega1: float = 1.5
    omega2: float = 2.0
    omega3: float = 1.0
    couplings: tuple[tuple[int, float], ...] = ((1, 1.0),)

    def min_positive_strength(self) -> float:
        """Smallest nonzero coupling strength, or 0.0 if all vanish."""
        positive = [g for _, g in self.couplings if g > 0.0]
        return min(positive) if positive else 0.0


@dataclass(frozen=True)
class TrialWindow:
    """Inclusive integer occupation range shared by both registers."""

    n_min: int
    n_max: int

    @property
    def size(self) -> int:
        return self.n_max - self.n_min + 1

    def indices(self) -> np.ndarray:
        return np.arange(self.n_min, self.n_max + 1)

    def contains(self, n: int) -> bool:
        return self.n_min <= n <= self.n_max

    def intersect(self, other: "TrialWindow") -> "TrialWindow":
        return TrialWindow(max(self.n_min, other.n_min), min(self.n_max, other.n_max))

    def is_valid(self) -> bool:
        return self.n_min >= 0 and self.n_max >= self.n_min + 1


def standard_trial_window(N: int) -> TrialWindow:
    """Candidate-factor range 2 .. ceil(N/2)."""
    return TrialWindow(2, math.ceil(N / 2))


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class JointState12:
    """State of the two trial-factor registers.

    Diagonal states (the common case: thermal and uniform preparations, and
    everything they evolve into here) are stored as a real (W, W) population
    table indexed [n - n_min, m - n_min]. General states with coherences are
    stored as the (W^2, W^2) complex Hermitian matrix over basis pairs
    (n, m), row-major in (n, m). `diagonal` discriminates the two layouts.

    trace_deficit_flag marks a deliberately sub-normalized truncation of an
    infinite-support distribution; such states are never silently
    renormalized.
    """

    window: TrialWindow
    weights: np.ndarray
    diagonal: bool
    trace_deficit_flag: bool = False

    def __post_init__(self):
        object.__setattr__(self, "weights", _frozen(self.weights))

    @property
    def pair_count(self) -> int:
        return self.window.size ** 2

    def trace(self) -> float:
        if self.diagonal:
            return float(np.sum(self.weights))
        return float(np.trace(self.weights).real)

    def populations(self) -> np.ndarray:
        """Diagonal weights as a (W, W) real table."""
        if self.diagonal:
            return self.weights
        w = self.window.size
        return self.weights.diagonal().real.reshape(w, w)

    def pair_matrix(self) -> np.ndarray:
        """Dense pair-indexed Hermitian matrix (materializes diagonal states)."""
        if not self.diagonal:
            return self.weights
        flat = self.weights.reshape(-1).astype(complex)
        return np.diag(flat)

    def validate(self, hermitian_tol: float = 1e-10, psd_tol: float = -1e-10,
                 trace_tol: float = 1e-12) -> list[str]:
        """Returns invariant violations; empty list means the state is sound."""
        problems: list[str] = []
        w = self.window.size
        if not self.window.is_valid():
            problems.append("window invariant n_max >= n_min + 1 violated")
            return problems
        if self.diagonal:
            if self.weights.shape != (w, w):
                problems.append(f"diagonal weights shape {self.weights.shape} != ({w}, {w})")
                return problems
            if np.iscomplexobj(self.weights):
                problems.append("diagonal weights must be real")
            if float(self.weights.min()) < psd_tol:
                problems.append("not positive semidefinite: negative population "
                                f"{float(self.weights.min()):.3e}")
        else:
            p = w * w
            if self.weights.shape != (p, p):
                problems.append(f"pair matrix shape {self.weights.shape} != ({p}, {p})")
                return problems
            dev = float(np.abs(self.weights - self.weights.conj().T).max())
            if dev > hermitian_tol:
                problems.append(f"not Hermitian: max deviation {dev:.3e}")
            else:
                lo = float(np.linalg.eigvalsh(self.weights).min())
                if lo < psd_tol:
                    problems.append(f"not positive semidefinite: min eigenvalue {lo:.3e}")
        tr = self.trace()
        if not 0.0 < tr <= 1.0 + trace_tol:
            problems.append(f"trace {tr!r} outside (0, 1]")
        elif not self.trace_deficit_flag and abs(tr - 1.0) > trace_tol:
            problems.append(f"trace {tr!r} != 1 and trace_deficit_flag not set")
        return problems

    def require_valid(self) -> "JointState12":
        problems = self.validate()
        if problems:
            raise StateValidationError("; ".join(problems))
        return self


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_params(params: SystemParams, window: TrialWindow, N: int) -> ValidationReport:
    """Static configuration check; reports problems instead of raising."""
    violations: list[str] = []
    warnings: list[str] = []
    for name in ("omega1", "omega2", "omega3"):
        if getattr(params, name) <= 0.0:
            violations.append(f"{name} > 0 violated (got {getattr(params, name)!r})")
    orders = [k for k, _ in params.couplings]
    if any((not isinstance(k, int)) or k < 1 for k in orders):
        violations.append("coupling orders must be positive integers")
    if len(set(orders)) != len(orders):
        violations.append("coupling orders must be distinct")
    if any(g < 0.0 for _, g in params.couplings):
        violations.append("coupling strengths must be non-negative")
    if params.min_positive_strength() == 0.0:
        warnings.append("all coupling strengths are zero: the measurement will be uninformative")
    if window.n_min < 0:
        violations.append(f"n_min >= 0 violated (got {window.n_min})")
    if window.n_max < window.n_min + 1:
        violations.append(f"n_max >= n_min + 1 violated (n_min={window.n_min}, n_max={window.n_max})")
    if N < 4:
        violations.append(f"N >= 4 violated (got {N})")
    return ValidationReport(tuple(violations), tuple(warnings))


def factor_pairs_in_window(N: int, window: TrialWindow) -> set[tuple[int, int]]:
    """All ordered pairs (r, s) with r*s = N and both factors in the window."""
    pairs: set[tuple[int, int]] = set()
    for r in range(max(window.n_min, 1), window.n_max + 1):
        if N % r == 0:
            s = N // r
            if window.contains(s):
                pairs.add((r, s))
    return pairs
