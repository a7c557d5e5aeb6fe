"""Simulator for a three-oscillator quantum factoring protocol.

Two trial-factor registers evolve under a product-dependent nonlinear
coupling to a third, coherent-state oscillator; number-state pairs whose
product misses the target dephase away, and a conditional measurement on
the third oscillator leaves the registers concentrated on the factors.
Everything is exactly solvable, so the engine works in closed form and an
independent truncated-Fock oracle cross-checks it.
"""

__version__ = "0.1.0"

from .model import (
    HBAR,
    SystemParams,
    TrialWindow,
    JointState12,
    ValidationReport,
    StateValidationError,
    VanishingNormError,
    factor_pairs_in_window,
    standard_trial_window,
    validate_params,
)
from .stateprep import (
    ThermalSpec,
    WINDOW_MODES,
    build_custom_joint,
    build_thermal_joint,
    build_uniform_joint,
    full_support_n_max,
    mean_occupation,
    thermal_probability,
)
from .analytic import (
    ConditionalResult,
    FactorState,
    NoFactorsError,
    ThermalEnsemble,
    coherent_overlap,
    conditional_reduction,
    evolved_phase_factor,
    factor_target_state,
    free_evolution,
    rotation_frequency,
    thermal_fidelity_closed_form,
    trace_distance,
    uhlmann_fidelity,
)
from .damping import (
    BathSpec,
    DampedGaussianState,
    DissipativeFidelity,
    damped_step,
    damped_trajectory,
    dissipative_thermal_fidelity,
    q_overlap,
)
from .experiments import (
    FactorReport,
    FidelitySeries,
    ProtocolError,
    Scenario,
    extract_factors,
    fidelity_curve,
    first_threshold_time,
    locate_first_peak,
    oracle_equivalence_report,
    run_protocol,
    sweep,
)
from .config import RunConfig, load_config, parse_config, preset, serialize_config

__all__ = [name for name in dir() if not name.startswith("_")]
