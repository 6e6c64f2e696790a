"""Gaussian simulation of pulsed optomechanical entanglement and readout."""

from .errors import (
    ConfigError,
    DegenerateProfile,
    DimensionMismatch,
    NonPhysicalState,
    ParseError,
    PulsedOptoError,
    ValidationError,
)
from .measures import (
    HomodyneAngles,
    Measures,
    angle_scan,
    apply_loss,
    compute_measures,
    gen_quad_variance,
    log_negativity,
    optimize_angles,
    symplectic_eigenvalues,
    two_mode_squeezing_db,
)
from .model import (
    Frame,
    PulseKind,
    SystemParams,
    build_diffusion,
    build_drift_beyond_rwa,
    build_drift_lab,
    build_drift_rwa,
    rotation_matrix,
)
from .propagate import (
    CovarianceMatrix,
    LyapunovSystem,
    ModeProfile,
    augment_with_pulse,
    free_segment,
    matrix_exponential,
    solve_lyapunov,
    temporal_mode,
)
from .protocol import (
    EnsembleStats,
    ProtocolResult,
    adiabatic_blue,
    adiabatic_red,
    critical_gamma,
    evaluate,
    monte_carlo_ensemble,
    optimize_max_gamma,
    run_blue,
    run_full,
)

__version__ = "0.1.0"
