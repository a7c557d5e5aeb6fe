import math

import numpy as np
import pytest

from oscfactor import SystemParams, coherent_overlap, rotation_frequency
from oscfactor.fockoracle import (
    InsufficientDimensionError,
    coherent_fock_vector,
    default_dimension,
    fock_trace_distance,
    lindblad_rk4_evolve,
    reconstruct_gaussian,
    thermal_fock_matrix,
    unitary_overlap_oracle,
)


def test_default_dimension():
    assert default_dimension(5.0) == 65
    assert default_dimension(0.0) == 10


def test_coherent_vector_against_factorials():
    alpha = 1.3 - 0.4j
    c = coherent_fock_vector(alpha, 40)
    assert np.vdot(c, c).real == pytest.approx(1.0, abs=1e-12)
    for n in (0, 1, 5, 12):
        direct = math.exp(-0.5 * abs(alpha) ** 2) * alpha**n / math.sqrt(math.factorial(n))
        assert c[n] == pytest.approx(direct, rel=1e-12)
    mean_n = float(np.sum(np.arange(40) * np.abs(c) ** 2))
    assert mean_n == pytest.approx(abs(alpha) ** 2, rel=1e-10)


def test_coherent_vector_insufficient_dimension():
    with pytest.raises(InsufficientDimensionError, match="insufficient dimension"):
        coherent_fock_vector(5.0, 10)


def test_unitary_overlap_matches_closed_form():
    params = SystemParams()
    ref = rotation_frequency(params, 3, 5)
    # small tau keeps |overlap| well away from zero, where relative
    # comparison against the truncated sum is meaningful
    for n, m, tau in [(2, 7, 0.005), (3, 4, 0.05), (6, 6, 0.002), (3, 5, 0.01), (0, 0, 0.02)]:
        omega = rotation_frequency(params, n, m)
        exact = coherent_overlap(5.0, ref, omega, tau)
        probe = unitary_overlap_oracle(5.0, ref, omega, tau)
        assert abs(exact - probe) / abs(probe) < 1e-8


def test_thermal_fock_matrix():
    rho = thermal_fock_matrix(0.8, 60)
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-6)
    mean = float(np.sum(np.arange(60) * np.diag(rho).real))
    assert mean == pytest.approx(0.8, rel=1e-5)
    vac = thermal_fock_matrix(0.0, 5)
    assert vac[0, 0] == 1.0 and np.trace(vac).real == 1.0


def test_reconstruct_gaussian_coherent_limit():
    mu = 1.1 + 0.7j
    rho = reconstruct_gaussian(mu, 0.0, 40)
    c = coherent_fock_vector(mu, 40)
    assert fock_trace_distance(rho, np.outer(c, c.conj())) < 1e-10


def test_rk4_pure_rotation_is_exact_phase():
    c = coherent_fock_vector(2.0, 30)
    rho0 = np.outer(c, c.conj())
    omega, tau = 3.0, 0.4
    evolved = lindblad_rk4_evolve(rho0, omega, 0.0, 0.0, tau)
    n = np.arange(30)
    phases = np.exp(-1j * omega * np.subtract.outer(n, n) * tau)
    assert fock_trace_distance(evolved, rho0 * phases) < 1e-9
    assert np.trace(evolved).real == pytest.approx(1.0, abs=1e-10)


def test_rk4_against_gaussian_closed_form():
    from oscfactor.damping import damped_trajectory
    alpha, omega, gamma, nbar, tau = 2.0 + 0.0j, 4.0, 0.5, 0.5, 0.3
    d = 40
    c = coherent_fock_vector(alpha, d)
    integrated = lindblad_rk4_evolve(np.outer(c, c.conj()), omega, gamma, nbar, tau)
    state = damped_trajectory(alpha, omega, gamma, nbar, tau)
    predicted = reconstruct_gaussian(state.mu, state.nu, d)
    assert fock_trace_distance(integrated, predicted) < 1e-6


def test_rk4_halving_dt_cuts_error_by_at_least_eight():
    from oscfactor.damping import damped_trajectory
    alpha, omega, gamma, nbar, tau = 2.0 + 0.0j, 8.0, 0.5, 0.3, 0.2
    d = 40
    c = coherent_fock_vector(alpha, d)
    rho0 = np.outer(c, c.conj())
    state = damped_trajectory(alpha, omega, gamma, nbar, tau)
    reference = reconstruct_gaussian(state.mu, state.nu, d)
    coarse = fock_trace_distance(lindblad_rk4_evolve(rho0, omega, gamma, nbar, tau, dt=4e-3),
                                 reference)
    fine = fock_trace_distance(lindblad_rk4_evolve(rho0, omega, gamma, nbar, tau, dt=2e-3),
                               reference)
    assert coarse / fine >= 8.0


def test_rk4_doubling_dimension_changes_little():
    c32 = coherent_fock_vector(2.0, 32)
    c64 = coherent_fock_vector(2.0, 64)
    a = lindblad_rk4_evolve(np.outer(c32, c32.conj()), 2.0, 0.4, 0.2, 0.3)
    b = lindblad_rk4_evolve(np.outer(c64, c64.conj()), 2.0, 0.4, 0.2, 0.3)
    padded = np.zeros_like(b)
    padded[:32, :32] = a
    assert fock_trace_distance(padded, b) < 1e-9


def test_rk4_flags_oversized_step():
    # damping rates near the truncation edge put the stiff scale far above
    # 1/dt, so the integrator diverges and the trace alarm must fire
    c = coherent_fock_vector(2.0, 30)
    with pytest.raises(RuntimeError, match="step too large"):
        lindblad_rk4_evolve(np.outer(c, c.conj()), 1.0, 2.0, 1.0, 2.0, dt=0.2)


def test_rk4_domain_checks():
    c = coherent_fock_vector(1.0, 16)
    rho = np.outer(c, c.conj())
    with pytest.raises(ValueError):
        lindblad_rk4_evolve(rho, 1.0, 0.1, 0.0, -1.0)
    with pytest.raises(ValueError):
        lindblad_rk4_evolve(rho, 1.0, 0.1, 0.0, 1.0, dt=0.0)
    with pytest.raises(ValueError):
        lindblad_rk4_evolve(np.ones((3, 4)), 1.0, 0.1, 0.0, 1.0)
