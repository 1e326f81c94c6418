"""Desk-scale modelling toolkit for sub-Kelvin EIT spectroscopy in
167Er:LiYF4: hyperfine level structure, clock-transition (ZEFOZ) search,
EIT/heterodyne observables, phonon-bottleneck broadening and nonlinear
least-squares parameter extraction.
"""

from .eit import (
    EitLineParams,
    PolaritonParams,
    collective_coupling,
    collective_coupling_rate,
    eit_visibility,
    eit_width,
    group_delay,
    group_delay_from_phase,
    mixing_angle,
    ovna_amplitude,
    ovna_phase,
    susceptibility,
)
from .errors import (
    ConfigError,
    ContractViolationError,
    ErlyfError,
    InvalidParameterError,
    PhaseSingularityError,
    SearchFailedError,
    SingularJacobianError,
    TraceFormatError,
)
from .fitting import (
    FitResult,
    GaussianNoise,
    eit_trace_model,
    fit_eit_trace,
    fit_field_series,
    fit_temperature_series,
    generate_synthetic_trace,
    initial_guess_from_trace,
)
from .spin import (
    FieldVector,
    LevelSet,
    LevelSweep,
    PopulationSet,
    SpinParams,
    basis_order,
    boltzmann_populations,
    build_hamiltonian,
    diagonalize,
    eigensolve,
    sweep_levels,
    track_indices,
)
from .thermal import NqpParams, coth, effective_temperature, gamma_hf_vs_temperature, nqp_broadening
from .traceio import OvnaTrace, read_trace, write_trace
from .transitions import (
    LambdaSystem,
    SpinWidthModel,
    Transition,
    ZefozReport,
    find_lambda_systems,
    optical_amplitudes,
    optical_transitions,
    pair_indices_by_character,
    refine_symmetric_field,
    spin_linewidth,
    spin_transition_frequency,
    synthesize_absorption,
    zefoz_search,
)

__version__ = "0.1.0"
