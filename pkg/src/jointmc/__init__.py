"""Joint recovery of two correlated low-rank datasets.

Singular value thresholding (SVT), Bayesian SVT with SURE-tuned thresholds,
a block-Toeplitz synthetic source model, and the observation-count limits
that say when stacking two datasets beats recovering them one at a time.
"""

from jointmc.errors import (
    CalibrationError,
    ConfigError,
    InvalidParameterError,
    JointMCError,
    NotPositiveSemidefiniteError,
)

__version__ = "0.1.0"

__all__ = [
    "CalibrationError",
    "ConfigError",
    "InvalidParameterError",
    "JointMCError",
    "NotPositiveSemidefiniteError",
]
