"""Exact-simulation toolkit for spectral-filter state preparation.

Energies handed to the filter (``mu``, ``eps``) are in normalized units:
the spectrum is first mapped affinely onto [delta, 1 - delta] with
``normalize_spectrum``.  Reports carry output energies in both units.
"""
from .core import (
    MAX_EIG_DIM,
    MAX_QUBITS,
    CapacityError,
    HermitianOperator,
    NumericalConsistencyError,
    Projector,
    RegisterLayout,
    SpectralDecomposition,
    StateVector,
    ValidationError,
    expectation_value,
    make_rng,
    measure_projector,
    random_state,
    register_zero_projector,
    spectral_decompose,
)
from .hamiltonians import MODEL_KINDS, IsingParams, SpectrumMap, build_model, classical_energy, normalize_spectrum
from .filters import (
    FilterSpec,
    apply_inverse_phase_estimation,
    cyclic_distance,
    lower_bound_radius,
    momentum_overlap,
    momentum_state,
    overlap_upper_bound,
    select_filter_params,
)
from .amplification import (
    AmplificationReport,
    SweepResult,
    amplify,
    compute_overlap,
    grover_iterations,
    prepare_filtered_state,
    rotation_success,
    sweep_mu,
)
from .jordan import JordanBlock, JordanDecomposition, jordan_decompose, naive_overlap_formula, run_naive_demo
from .qma import (
    VerifierCircuit,
    apply_inverse_switch_circuit,
    apply_switch_circuit,
    g_filter,
    g_filter_binomial,
    g_filter_gaussian,
    prepare_witness,
    switch_filter_state,
    switch_stats,
)
from .thermal import DensityOfStates, estimate_dos, gibbs_weights, prepare_thermal_state, sample_energy

__version__ = "0.1.0"
