"""Fractional Brownian motion, its martingale transforms and a Girsanov density.

Modules
-------
core       parameter types, grids, transform constants, fBm covariance
fbm_sim    exact fBm samplers and the fractional Ornstein-Uhlenbeck process
fraccalc   product integration, Riemann-Liouville integral and derivative
transform  W -> (Y, M, B), reconstruction of W from B, the drift pipeline
girsanov   log-density of a drifted path, Monte Carlo checks, fOU MLE
verify     acceptance checks used by the CLI and the tests
"""

__version__ = "0.1.0"

from .core import (
    DomainError,
    HurstParam,
    PreconditionError,
    SampledPath,
    TimeGrid,
    fbm_covariance,
    norros_constants,
)
from .fbm_sim import FouParams, RngSeed, sample_fbm_cholesky, sample_fbm_circulant, sample_fou
from .fraccalc import (
    SingularMomentTable,
    empirical_holder_exponent,
    holder_rescale,
    rl_derivative,
    rl_integral,
    singular_moment,
)
from .transform import (
    DriftBundle,
    TransformBundle,
    decompose_path,
    drift_pipeline,
    forward_transform,
    gamma_drift,
    kernel_w,
    kernel_zeta,
    reconstruct_fbm,
)
from .girsanov import (
    DensityReport,
    DriftSpec,
    MleReport,
    density_for_drifted_path,
    fou_mle,
    log_density,
    mc_density_normalization,
)

__all__ = [
    "DensityReport", "DomainError", "DriftBundle", "DriftSpec", "FouParams", "HurstParam",
    "MleReport", "PreconditionError", "RngSeed", "SampledPath", "SingularMomentTable",
    "TimeGrid", "TransformBundle", "decompose_path", "density_for_drifted_path",
    "drift_pipeline", "empirical_holder_exponent", "fbm_covariance", "forward_transform",
    "fou_mle", "gamma_drift", "holder_rescale", "kernel_w", "kernel_zeta", "log_density",
    "mc_density_normalization", "norros_constants", "reconstruct_fbm", "rl_derivative",
    "rl_integral", "sample_fbm_cholesky", "sample_fbm_circulant", "sample_fou",
    "singular_moment",
]
