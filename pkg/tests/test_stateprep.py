import math

import numpy as np
import pytest

from oscfactor import (
    SystemParams,
    ThermalSpec,
    TrialWindow,
    build_custom_joint,
    build_thermal_joint,
    build_uniform_joint,
    full_support_n_max,
    mean_occupation,
    thermal_probability,
)


def test_thermal_probability_values():
    assert thermal_probability(1.5, 3.0, 3) == pytest.approx(0.08779487691181713, abs=1e-15)
    assert thermal_probability(1.5, 3.0, 0) == pytest.approx(0.3934693402873666, abs=1e-15)


def test_thermal_probability_normalizes():
    n = np.arange(0, 400)
    total = sum(thermal_probability(1.5, 3.0, int(k)) for k in n)
    assert total == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("omega,T", [(0.0, 3.0), (-1.0, 3.0), (1.0, 0.0), (1.0, -2.0)])
def test_thermal_probability_domain(omega, T):
    with pytest.raises(ValueError):
        thermal_probability(omega, T, 0)
    with pytest.raises(ValueError):
        mean_occupation(omega, T)


def test_thermal_probability_rejects_negative_n():
    with pytest.raises(ValueError):
        thermal_probability(1.5, 3.0, -1)


def test_mean_occupations():
    assert mean_occupation(1.5, 3.0) == pytest.approx(1.5414940825367982, abs=1e-15)
    assert mean_occupation(2.0, 3.0) == pytest.approx(1.055148339809722, abs=1e-15)
    assert mean_occupation(1.0, 3.0) == pytest.approx(2.527726473157129, abs=1e-15)


def test_full_support_size(params, thermal):
    assert full_support_n_max(params, thermal) == 56


def test_full_support_tail_is_below_cutoff(params, thermal):
    n_star = full_support_n_max(params, thermal)
    for omega in (params.omega1, params.omega2):
        x = math.exp(-omega / thermal.temperature)
        tail = x ** (n_star + 1)  # geometric mass strictly beyond n_star
        assert tail < thermal.tail_cutoff / 2


def test_thermal_spec_domain():
    with pytest.raises(ValueError):
        ThermalSpec(temperature=0.0)
    with pytest.raises(ValueError):
        ThermalSpec(tail_cutoff=0.0)
    with pytest.raises(ValueError):
        ThermalSpec(tail_cutoff=1e-3)


def test_build_thermal_joint_full_support(params, thermal):
    state = build_thermal_joint(params, thermal, "full-support", 15)
    assert state.window == TrialWindow(0, 56)
    assert state.trace_deficit_flag
    assert state.trace() == pytest.approx(0.9999999999995807, abs=1e-15)
    assert state.validate() == []
    # raw weights: each entry is the bare product of per-mode probabilities
    p33 = thermal_probability(params.omega1, thermal.temperature, 3)
    p53 = thermal_probability(params.omega2, thermal.temperature, 5)
    assert state.populations()[3, 5] == pytest.approx(p33 * p53, rel=1e-14)


def test_build_thermal_joint_trial_window(params, thermal):
    state = build_thermal_joint(params, thermal, "trial-window", 15)
    assert state.window == TrialWindow(2, 8)
    assert not state.trace_deficit_flag
    assert state.trace() == pytest.approx(1.0, abs=1e-14)
    assert state.validate() == []


def test_build_thermal_joint_rejects_unknown_mode(params, thermal):
    with pytest.raises(ValueError, match="window mode"):
        build_thermal_joint(params, thermal, "everything", 15)


def test_build_uniform_joint():
    state = build_uniform_joint(TrialWindow(2, 8))
    pops = state.populations()
    assert pops.shape == (7, 7)
    assert np.all(pops == pops[0, 0])
    assert state.trace() == pytest.approx(1.0, abs=1e-15)


def test_build_custom_joint_diagonal():
    w = np.full((3, 3), 1.0 / 9.0)
    state = build_custom_joint(TrialWindow(2, 4), w)
    assert state.diagonal
    assert state.validate() == []


def test_build_custom_joint_dense():
    rng = np.random.default_rng(5)
    m = rng.normal(size=(9, 9)) + 1j * rng.normal(size=(9, 9))
    rho = m @ m.conj().T
    rho /= np.trace(rho).real
    state = build_custom_joint(TrialWindow(2, 4), rho)
    assert not state.diagonal
    assert state.validate() == []


def test_build_custom_joint_rejects_bad_shape():
    with pytest.raises(ValueError, match="matches neither"):
        build_custom_joint(TrialWindow(2, 4), np.ones((4, 4)) / 16.0)


def test_build_custom_joint_names_violation():
    w = np.full((3, 3), 1.0 / 9.0)
    w[0, 0] = -0.2
    with pytest.raises(Exception, match="(?i)positive|trace"):
        build_custom_joint(TrialWindow(2, 4), w)
