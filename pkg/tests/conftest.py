import numpy as np
import pytest

from oscfactor import JointState12, SystemParams, ThermalSpec, TrialWindow


@pytest.fixture
def params():
    return SystemParams()


@pytest.fixture
def thermal():
    return ThermalSpec()


def random_diagonal_state(rng, window=None, trace=1.0, flag=False):
    window = window or TrialWindow(2, 8)
    w = rng.random((window.size, window.size))
    w *= trace / w.sum()
    return JointState12(window, w, diagonal=True, trace_deficit_flag=flag)


def random_dense_state(rng, window=None):
    """Random full-rank density matrix over pair space, guaranteed PSD."""
    window = window or TrialWindow(2, 5)
    d = window.size**2
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = m @ m.conj().T
    rho /= np.trace(rho).real
    return JointState12(window, rho, diagonal=False)
