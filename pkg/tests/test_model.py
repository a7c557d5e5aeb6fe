import math

import numpy as np
import pytest

from oscfactor import (
    JointState12,
    StateValidationError,
    SystemParams,
    TrialWindow,
    factor_pairs_in_window,
    standard_trial_window,
    validate_params,
)
from conftest import random_dense_state, random_diagonal_state


def test_trial_window_basics():
    w = TrialWindow(2, 8)
    assert w.size == 7
    assert list(w.indices()) == [2, 3, 4, 5, 6, 7, 8]
    assert w.contains(2) and w.contains(8) and not w.contains(9)
    assert w.intersect(TrialWindow(0, 5)) == TrialWindow(2, 5)
    assert w.is_valid()
    assert not TrialWindow(5, 5).is_valid()


@pytest.mark.parametrize("N,expected", [(15, (2, 8)), (35, (2, 18)), (13, (2, 7)), (4, (2, 2))])
def test_standard_trial_window(N, expected):
    w = standard_trial_window(N)
    assert (w.n_min, w.n_max) == expected


@pytest.mark.parametrize("N,bounds,expected", [
    (15, (2, 8), {(3, 5), (5, 3)}),
    (35, (2, 18), {(5, 7), (7, 5)}),
    (13, (2, 7), set()),
    (16, (2, 8), {(2, 8), (8, 2), (4, 4)}),
])
def test_factor_pairs_examples(N, bounds, expected):
    assert factor_pairs_in_window(N, TrialWindow(*bounds)) == expected


def test_factor_pairs_against_trial_division():
    for N in range(4, 201):
        window = standard_trial_window(N)
        got = factor_pairs_in_window(N, window)
        brute = {(r, s) for r in window.indices() for s in window.indices()
                 if int(r) * int(s) == N}
        assert got == brute
        assert all((s, r) in got for r, s in got)


def test_validate_params_clean(params):
    report = validate_params(params, TrialWindow(2, 8), 15)
    assert report.ok
    assert len(report.violations) == 0


def test_validate_params_violations():
    report = validate_params(SystemParams(omega1=0.0), TrialWindow(2, 8), 15)
    assert any("omega1 > 0" in v for v in report.violations)

    # degenerate window built directly so the validator is what rejects it
    report = validate_params(SystemParams(), TrialWindow(5, 3), 15)
    assert any("n_max >= n_min + 1" in v for v in report.violations)

    report = validate_params(SystemParams(), TrialWindow(2, 8), 3)
    assert any("N >= 4" in v for v in report.violations)

    report = validate_params(SystemParams(couplings=((1, 1.0), (1, 0.5))),
                             TrialWindow(2, 8), 15)
    assert any("distinct" in v for v in report.violations)


def test_validate_params_zero_coupling_warns_not_fails():
    report = validate_params(SystemParams(couplings=((1, 0.0),)), TrialWindow(2, 8), 15)
    assert report.ok
    assert any("uninformative" in w for w in report.warnings)


def test_diagonal_state_roundtrip():
    rng = np.random.default_rng(7)
    state = random_diagonal_state(rng)
    assert state.validate() == []
    assert math.isclose(state.trace(), 1.0, rel_tol=0, abs_tol=1e-12)
    dense = state.pair_matrix()
    assert dense.shape == (49, 49)
    assert np.allclose(np.diag(dense), state.populations().reshape(-1))


def test_dense_state_validation():
    rng = np.random.default_rng(11)
    state = random_dense_state(rng)
    assert state.validate() == []


def test_nonhermitian_perturbation_rejected():
    rng = np.random.default_rng(13)
    for seed in range(20):
        state = random_dense_state(np.random.default_rng(seed))
        bad = state.weights.copy()
        i, j = rng.integers(0, bad.shape[0], size=2)
        while i == j:
            j = rng.integers(0, bad.shape[0])
        bad[i, j] += 1e-6  # breaks conjugate symmetry well past the 1e-8 line
        broken = JointState12(state.window, bad, diagonal=False)
        assert any("Hermitian" in p for p in broken.validate())


def test_trace_rules():
    window = TrialWindow(2, 4)
    w = np.full((3, 3), 1.0 / 9.0)
    assert JointState12(window, w, diagonal=True).validate() == []

    deficient = JointState12(window, w * 0.9, diagonal=True)
    assert any("trace" in p for p in deficient.validate())
    flagged = JointState12(window, w * 0.9, diagonal=True, trace_deficit_flag=True)
    assert flagged.validate() == []

    heavy = JointState12(window, w * 1.1, diagonal=True)
    assert any("trace" in p for p in heavy.validate())

    negative = w.copy()
    negative[0, 0] = -1e-6
    assert any(p for p in JointState12(window, negative, diagonal=True).validate())


def test_require_valid_raises():
    window = TrialWindow(2, 4)
    bad = JointState12(window, np.full((3, 3), -0.1), diagonal=True)
    with pytest.raises(StateValidationError):
        bad.require_valid()


def test_weights_are_frozen():
    state = random_diagonal_state(np.random.default_rng(3))
    with pytest.raises(ValueError):
        state.weights[0, 0] = 2.0
