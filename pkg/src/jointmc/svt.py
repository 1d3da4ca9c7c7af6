"""Singular value thresholding for matrix completion.

Iterates ``X = D_tau(Y)``, ``Y += step * P_Omega(R - X)`` from ``Y = 0`` until
the relative residual on the observed entries drops below the tolerance.
"""

from dataclasses import dataclass, field

import numpy as np

from jointmc.errors import InvalidParameterError
from jointmc.matrix_ops import soft_threshold

MAX_STEP = 1.99


@dataclass(frozen=True)
class SvtParams:
    tau: float
    step: float
    tolerance: float = 1e-4
    max_iterations: int = 500

    def __post_init__(self):
        if not self.tau > 0:
            raise InvalidParameterError(f"tau must be positive, got {self.tau}")
        if not 0 < self.step < 2:
            raise InvalidParameterError(f"step must lie in (0, 2), got {self.step}")
        if not self.tolerance > 0:
            raise InvalidParameterError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 1:
            raise InvalidParameterError("max_iterations must be at least 1")

    @classmethod
    def defaults(cls, obs, **overrides):
        """``tau = 5N`` and the clamped ``1.2 / p`` step for an observation set."""
        values = {
            "tau": 5.0 * obs.shape[1],
            "step": default_step(obs.sampling_fraction),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass
class RecoveryResult:
    estimate: np.ndarray
    iterations: int
    converged: bool
    residual_history: list = field(default_factory=list)
    threshold_history: list = field(default_factory=list)
    sigma_clamped: bool = False

    @property
    def final_tau(self):
        return self.threshold_history[-1] if self.threshold_history else float("nan")


def default_step(sampling_fraction):
    if not 0 < sampling_fraction <= 1:
        raise InvalidParameterError(
            f"sampling fraction must lie in (0, 1], got {sampling_fraction}"
        )
    return min(1.2 / sampling_fraction, MAX_STEP)


def observed_residual(obs, estimate, reference_norm):
    return float(np.linalg.norm(obs.project(estimate) - obs.values) / reference_norm)


def svt_recover(obs, params, tau_schedule=None):
    """Run SVT on an :class:`~jointmc.acquisition.ObservationSet`.

    ``tau_schedule``, if given, overrides ``params.tau`` at each iteration
    (``tau_schedule[k - 1]`` thresholds iteration ``k``); the schedule's last
    value repeats once exhausted.
    """
    if obs.n_observed < 1:
        raise InvalidParameterError("observation set is empty")
    observed = obs.values
    ref_norm = np.linalg.norm(observed)
    if ref_norm == 0:
        ref_norm = 1.0
    y = np.zeros(obs.shape)
    x = y
    residuals, taus = [], []
    converged = False
    for k in range(1, params.max_iterations + 1):
        if tau_schedule is None:
            tau = params.tau
        else:
            tau = tau_schedule[min(k - 1, len(tau_schedule) - 1)]
        x = soft_threshold(y, tau)
        residual = observed_residual(obs, x, ref_norm)
        residuals.append(residual)
        taus.append(float(tau))
        if residual <= params.tolerance:
            converged = True
            break
        y = y + params.step * (observed - obs.project(x))
    return RecoveryResult(x, k, converged, residuals, taus)
