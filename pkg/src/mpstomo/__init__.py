"""Matrix-product-state tomography from randomized X/Z measurements."""

__version__ = "0.1.0"

from .dmrg import DmrgConfig, DmrgResult, dmrg_solve
from .errors import (
    DegenerateDiagnosticError,
    InvalidArgumentError,
    InvalidOracleError,
    InvalidStateError,
    InvisibleObservableError,
    ResourceLimitError,
    TrainingFailedError,
)
from .evaluation import (
    PowerLawFit,
    ScalingCurve,
    bound_exceedance,
    evaluate_report,
    fit_power_law,
    samples_to_threshold,
    string_ratio,
)
from .hamiltonians import (
    MPO,
    dense_hamiltonian,
    ghz_state,
    interpolated_state,
    ruby_rydberg_mpo,
    surface_code_mpo,
    surface_code_stabilizers,
)
from .measurement import (
    Dataset,
    EnsembleSpec,
    MeasurementRecord,
    draw_basis,
    generate_dataset,
    load_dataset,
    save_dataset,
    split_dataset,
)
from .mps import (
    MPSState,
    amplitude,
    canonicalize,
    entanglement_entropy,
    fidelity,
    inner_product,
    load_mps,
    local_fidelity,
    new_random_mps,
    normalize,
    pauli_expectation,
    product_state,
    reduced_density_matrix,
    sample_bitstring,
    save_mps,
    schmidt_values,
)
from .paulis import PauliString
from .shadows import (
    ShadowAccumulator,
    estimate_pauli,
    estimate_subsystem_rdm_projected,
    measurement_channel_apply,
    reconstruct_real_pure_state,
    shadow_norm,
)
from .training import (
    LbfgsConfig,
    SgdConfig,
    TrainConfig,
    TrainHistory,
    nll_gradient,
    nll_loss,
    rdm_regularizer,
    select_model,
    stabilizer_regularizer,
    train,
)
