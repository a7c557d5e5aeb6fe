import math

import numpy as np
import pytest

from oscfactor import (
    BathSpec,
    DampedGaussianState,
    SystemParams,
    ThermalEnsemble,
    ThermalSpec,
    damped_step,
    damped_trajectory,
    dissipative_thermal_fidelity,
    q_overlap,
    thermal_fidelity_closed_form,
)
from oscfactor.damping import dissipative_values

TAU_STAR = 0.3483962920105309  # working point of the default N=15 setup


def test_bathspec_registers_must_be_lossless():
    with pytest.raises(ValueError, match="gamma1"):
        BathSpec(gamma3=0.5, gamma1=0.1)
    with pytest.raises(ValueError, match="nbar2"):
        BathSpec(gamma3=0.5, nbar2=0.1)
    with pytest.raises(ValueError, match="gamma3"):
        BathSpec(gamma3=-0.5)
    with pytest.raises(ValueError, match="nbar3"):
        BathSpec(gamma3=0.5, nbar3=-1.0)


def test_bathspec_from_thermal():
    bath = BathSpec.from_thermal(0.5, 1.0, 3.0)
    assert bath.gamma3 == 0.5
    assert bath.nbar3 == pytest.approx(2.527726473157129, abs=1e-15)


def test_damped_trajectory_limits():
    free = damped_trajectory(2.0 + 1.0j, 3.0, 0.0, 0.0, 1.7)
    assert abs(free.mu) == pytest.approx(abs(2.0 + 1.0j), rel=1e-14)
    assert free.nu == 0.0

    late = damped_trajectory(2.0, 3.0, 4.0, 1.5, 50.0)
    assert abs(late.mu) < 1e-30
    assert late.nu == pytest.approx(1.5, rel=1e-12)

    with pytest.raises(ValueError):
        damped_trajectory(2.0, 3.0, -0.1, 0.0, 1.0)


def test_damped_step_composes_as_semigroup():
    rng = np.random.default_rng(31)
    for _ in range(200):
        alpha = complex(rng.normal(), rng.normal())
        omega, gamma = rng.uniform(0.1, 10), rng.uniform(0.0, 2.0)
        nbar = rng.uniform(0.0, 3.0)
        t1, t2 = rng.uniform(0.0, 2.0, size=2)
        direct = damped_trajectory(alpha, omega, gamma, nbar, t1 + t2)
        stepped = damped_step(damped_trajectory(alpha, omega, gamma, nbar, t1),
                              omega, gamma, nbar, t2)
        assert stepped.mu == pytest.approx(direct.mu, abs=1e-12)
        assert stepped.nu == pytest.approx(direct.nu, abs=1e-12)


def test_q_overlap_reference_points():
    assert q_overlap(DampedGaussianState(mu=1.0 + 2.0j, nu=2.0), 1.0 + 2.0j) \
        == pytest.approx(1.0 / 3.0, abs=1e-15)
    beta, mu = 0.5, 1.5
    pure = q_overlap(DampedGaussianState(mu=mu, nu=0.0), beta)
    assert pure == pytest.approx(math.exp(-abs(beta - mu) ** 2), rel=1e-14)
    with pytest.raises(ValueError):
        q_overlap(DampedGaussianState(mu=0.0, nu=-0.5), 0.0)


def test_dissipative_reduces_to_unitary_at_zero_rate(params, thermal):
    for tau in (0.1, TAU_STAR, 0.8):
        diss = dissipative_thermal_fidelity(params, thermal, 15, 5.0,
                                            BathSpec(gamma3=0.0), tau)
        unit = thermal_fidelity_closed_form(params, thermal, 15, 5.0, tau)
        assert diss.fidelity == pytest.approx(unit, rel=1e-10)


@pytest.mark.parametrize("gamma3,expected", [
    (0.0, 0.9298925087069397),
    (0.5, 0.8911870310548402),
    (1.0, 0.8452399485679953),
])
def test_dissipative_values_at_working_point(params, thermal, gamma3, expected):
    got = dissipative_thermal_fidelity(params, thermal, 15, 5.0,
                                       BathSpec(gamma3=gamma3), TAU_STAR)
    assert got.fidelity == pytest.approx(expected, rel=1e-10)
    assert 0.0 < got.born_probability <= 1.0


def test_dissipative_fidelity_decreases_with_rate(params, thermal):
    values = [dissipative_thermal_fidelity(params, thermal, 15, 5.0,
                                           BathSpec(gamma3=g), TAU_STAR).fidelity
              for g in (0.0, 0.25, 0.5, 0.75, 1.0)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_hot_bath_hurts_more_than_cold(params, thermal):
    cold = dissipative_thermal_fidelity(params, thermal, 15, 8.0,
                                        BathSpec(gamma3=1.0), TAU_STAR)
    hot = dissipative_thermal_fidelity(params, thermal, 15, 8.0,
                                       BathSpec.from_thermal(1.0, 1.0, 3.0), TAU_STAR)
    assert hot.fidelity == pytest.approx(0.9367004722535054, rel=1e-10)
    assert hot.fidelity < cold.fidelity


def test_lossless_probe_differs_and_is_worse(params, thermal):
    bath = BathSpec(gamma3=1.0)
    damped = dissipative_thermal_fidelity(params, thermal, 15, 5.0, bath, TAU_STAR,
                                          probe="damped")
    lossless = dissipative_thermal_fidelity(params, thermal, 15, 5.0, bath, TAU_STAR,
                                            probe="lossless")
    # the lossless probe drifts away from the damped signal trajectory
    assert lossless.fidelity != pytest.approx(damped.fidelity, rel=1e-6)
    assert lossless.born_probability < damped.born_probability
    with pytest.raises(ValueError, match="probe"):
        dissipative_thermal_fidelity(params, thermal, 15, 5.0, bath, TAU_STAR,
                                     probe="wishful")


def test_dissipative_values_grid_shape(params, thermal):
    ens = ThermalEnsemble(params, thermal, 15, 5.0, "trial-window")
    grid = np.linspace(0.01, 1.0, 300)
    fid, born = dissipative_values(ens, BathSpec(gamma3=0.7, nbar3=0.2), grid)
    assert fid.shape == born.shape == grid.shape
    assert np.all((fid >= 0.0) & (fid <= 1.0 + 1e-12))
    assert np.all(born > 0.0)
    with pytest.raises(ValueError):
        dissipative_values(ens, BathSpec(gamma3=0.7), np.array([-0.1]))
