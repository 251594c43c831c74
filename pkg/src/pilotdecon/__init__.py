"""Wideband massive-MIMO pilot decontamination and channel interpolation.

Pipeline: estimate the angle-delay power spread function of contaminated
uplink sketches by group-sparse recovery, cluster it into desired-user
and copilot-interference masks, then decontaminate and interpolate the
space-frequency channel with MMSE or mask-constrained ADMM filters.  A
cellular Monte Carlo harness reproduces spectral-efficiency experiments
at desk scale.
"""

__version__ = "0.1.0"

from .steering import (
    SPEED_OF_LIGHT,
    ArrayConfig,
    DomainError,
    OfdmConfig,
    array_response,
    delay_response,
    steering_matrix,
    steering_vector,
)
from .grid import AngleDelayGrid, Dictionary
from .channel import (
    GeometryError,
    MultipathComponent,
    SamplingPattern,
    SketchWindow,
    UserGeometry,
    calibrate_snr_max,
    full_sampling,
    one_ring_mpcs,
    pilot_pattern,
    random_antenna_subset,
    realize_channel,
    sketch,
    snr_before_beamforming,
)
from .recovery import (
    NumericalError,
    PsfSolution,
    SolverConfig,
    lipschitz_estimate,
    prox_l21,
    solve_psf,
)
from .covariance import (
    AtomicCovariance,
    covariance_from_psf,
    spatial_covariance_from_psf,
    subspace_capture,
)
from .clustering import (
    ClusterHypothesis,
    MaskPair,
    OracleVerdict,
    SelectionResult,
    build_mask,
    cluster_by_delay,
    default_mask_threshold,
    partition_rectangles,
    supervised_select,
)
from .decontam import (
    AdmmConfig,
    AdmmResult,
    AdmmState,
    ColumnMmseFilter,
    MmseFilter,
    admm_interpolate,
    admm_residuals,
    interpolate_unprobed_columns,
    mmse_columnwise,
    mmse_full,
)
from .cellsim import (
    CellLayout,
    ExperimentResult,
    ExperimentSettings,
    LearningSettings,
    PowerModel,
    RateSample,
    SimulationConfig,
    UserPopulation,
    conjugate_beamformer,
    make_genie_oracle,
    mmse_beamformer,
    place_users,
    run_experiment,
    sinr,
    spectral_efficiency,
)

__all__ = [name for name in dir() if not name.startswith("_")]
