"""Bayesian singular value thresholding.

SVT iterations where the thresholded matrix is ``Z = Y + L``: ``Y`` is the
usual SVT dual variable (supported on the observed entries) and ``L`` fills
the unobserved entries with their LMMSE estimate from the prior covariance.
The threshold is re-chosen every iteration by minimising Stein's unbiased
risk estimate of the shrinkage estimator applied to ``Z``.
"""

from dataclasses import dataclass

import numpy as np

from jointmc.errors import InvalidParameterError, ShapeError
from jointmc.matrix_ops import soft_threshold, svd
from jointmc.svt import RecoveryResult, observed_residual

SIGMA_FLOOR = 1e-14
RIDGE_SCALE = 1e-8
REFINEMENT_POINTS = 50


@dataclass(frozen=True)
class BsvtParams:
    step: float = 1.0
    tolerance: float = 1e-4
    max_iterations: int = 500
    degeneracy_tolerance: float = 1e-10

    def __post_init__(self):
        if not self.step > 0:
            raise InvalidParameterError(f"step must be positive, got {self.step}")
        if not self.tolerance > 0:
            raise InvalidParameterError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 1:
            raise InvalidParameterError("max_iterations must be at least 1")


@dataclass(frozen=True)
class SureEvaluation:
    tau: float
    risk_estimate: float
    divergence: float
    sigma_sq: float


def _check_spectrum(singular_values):
    s = np.asarray(singular_values, dtype=float)
    if s.ndim != 1:
        raise ShapeError("singular values must be a 1-D array")
    if np.any(s < 0) or np.any(np.diff(s) > 0):
        raise InvalidParameterError("singular values must be nonnegative and sorted descending")
    return s


def has_repeated_values(s, degeneracy_tolerance=1e-10):
    """True if two consecutive sorted values differ by at most a relative ``degeneracy_tolerance``."""
    if s.size < 2:
        return False
    return bool(np.any(s[:-1] - s[1:] <= degeneracy_tolerance * s[:-1]))


def _pair_sums(s):
    """``c_i = sum_{j != i} 1 / (s_i**2 - s_j**2)`` for distinct values."""
    sq = s**2
    diff = sq[:, None] - sq[None, :]
    np.fill_diagonal(diff, np.inf)
    return (1.0 / diff).sum(axis=1)


def _divergence_many(s, taus, rows, pair_sums):
    taus = np.asarray(taus, dtype=float)[:, None]
    shrunk = np.maximum(s[None, :] - taus, 0.0)
    safe = np.where(s > 0, s, 1.0)
    # (s_i - tau)_+ / s_i with zero singular values contributing nothing
    ratio = np.where(s > 0, shrunk / safe, 0.0)
    n = s.size
    per_value = (s[None, :] > taus) + (rows - n) * ratio + 2.0 * s * shrunk * pair_sums
    return per_value.sum(axis=1)


def divergence(singular_values, tau, rows, degeneracy_tolerance=1e-10):
    """Closed-form divergence of singular value soft-thresholding.

    For a ``rows x n`` input (``rows >= n``) with distinct singular values
    ``s``::

        sum_i [1(s_i > tau) + (rows - n) (s_i - tau)_+ / s_i]
          + 2 sum_{i != j} s_i (s_i - tau)_+ / (s_i**2 - s_j**2)

    Returns 0 when any two singular values coincide within
    ``degeneracy_tolerance`` (relative).
    """
    s = _check_spectrum(singular_values)
    if rows < s.size:
        raise ShapeError(f"rows={rows} is smaller than the number of singular values {s.size}")
    if has_repeated_values(s, degeneracy_tolerance):
        return 0.0
    return float(_divergence_many(s, [tau], rows, _pair_sums(s))[0])


def _sure_many(s, taus, sigma_sq, rows, cols, degeneracy_tolerance):
    taus = np.asarray(taus, dtype=float)
    if has_repeated_values(s, degeneracy_tolerance):
        div = np.zeros_like(taus)
    else:
        div = _divergence_many(s, taus, rows, _pair_sums(s))
    fit = np.minimum(taus[:, None] ** 2, s[None, :] ** 2).sum(axis=1)
    return -rows * cols * sigma_sq + fit + 2.0 * sigma_sq * div, div


def sure(singular_values, tau, sigma_sq, rows, cols, degeneracy_tolerance=1e-10):
    """Stein's unbiased estimate of ``E||D_tau(Z) - M||_F^2`` for ``Z = M + N(0, sigma_sq)``."""
    if not sigma_sq > 0:
        raise InvalidParameterError(f"sigma_sq must be positive, got {sigma_sq}")
    s = _check_spectrum(singular_values)
    risk, div = _sure_many(s, [tau], sigma_sq, rows, cols, degeneracy_tolerance)
    return SureEvaluation(float(tau), float(risk[0]), float(div[0]), float(sigma_sq))


def optimize_tau(decomposition, sigma_sq, degeneracy_tolerance=1e-10):
    """Threshold minimising SURE over a data-driven grid.

    The grid is ``{0}``, every singular value, and the midpoints between
    consecutive values; a 50-point uniform refinement of the interval
    bracketing the coarse minimiser is then added. Ties go to the larger
    threshold.
    """
    if not sigma_sq > 0:
        raise InvalidParameterError(f"sigma_sq must be positive, got {sigma_sq}")
    s = _check_spectrum(decomposition.singular_values)
    rows, cols = decomposition.shape
    knots = np.unique(np.concatenate([[0.0], s]))
    coarse = np.unique(np.concatenate([knots, 0.5 * (knots[:-1] + knots[1:])]))
    risk, _ = _sure_many(s, coarse, sigma_sq, rows, cols, degeneracy_tolerance)
    best = _argmin_prefer_larger(risk)
    lo = coarse[max(best - 1, 0)]
    hi = coarse[min(best + 1, coarse.size - 1)]
    fine = np.linspace(lo, hi, REFINEMENT_POINTS)
    grid = np.concatenate([coarse, fine])
    risk = np.concatenate(
        [risk, _sure_many(s, fine, sigma_sq, rows, cols, degeneracy_tolerance)[0]]
    )
    order = np.argsort(grid, kind="stable")
    grid, risk = grid[order], risk[order]
    return float(grid[_argmin_prefer_larger(risk)])


def _argmin_prefer_larger(values):
    return int(np.flatnonzero(values == values.min())[-1])


class ColumnLmmse:
    """Column-wise Gaussian conditional mean for a fixed observation mask.

    Every column of the stacked matrix is one draw from ``N(0, Sigma)``, so
    the missing rows of column ``j`` are estimated from its observed rows
    ``O_j`` as ``Sigma[miss, O_j] (Sigma[O_j, O_j] + ridge I)^-1 y[O_j]``.
    The gains are computed once per mask.
    """

    def __init__(self, covariance, mask):
        covariance = np.asarray(covariance, dtype=float)
        mask = np.asarray(mask, dtype=bool)
        rows = mask.shape[0]
        if covariance.shape != (rows, rows):
            raise ShapeError(
                f"covariance is {covariance.shape}, observation rows need {(rows, rows)}"
            )
        self.mask = mask
        self.ridge = RIDGE_SCALE * np.trace(covariance) / rows
        self._columns = []
        total_var = 0.0
        for j in range(mask.shape[1]):
            seen = np.flatnonzero(mask[:, j])
            miss = np.flatnonzero(~mask[:, j])
            if miss.size == 0:
                continue
            if seen.size == 0:
                gain = np.zeros((miss.size, 0))
                total_var += np.trace(covariance[np.ix_(miss, miss)])
            else:
                cross = covariance[np.ix_(seen, miss)]
                gram = covariance[np.ix_(seen, seen)] + self.ridge * np.eye(seen.size)
                gain = np.linalg.solve(gram, cross).T
                total_var += np.trace(covariance[np.ix_(miss, miss)]) - np.sum(gain * cross.T)
            self._columns.append((j, seen, miss, gain))
        self.n_missing = int((~mask).sum())
        self.total_posterior_variance = float(total_var)

    def complete(self, y):
        """Estimate of the unobserved entries (zero on the observed ones)."""
        out = np.zeros(self.mask.shape)
        for j, seen, miss, gain in self._columns:
            if seen.size:
                out[miss, j] = gain @ y[seen, j]
        return out

    @property
    def error_per_entry(self):
        if self.n_missing == 0:
            raise InvalidParameterError("no unobserved entries")
        return self.total_posterior_variance / self.n_missing


def lmmse_complete(y, obs, spec):
    return ColumnLmmse(_covariance(spec), obs.mask).complete(np.asarray(y, dtype=float))


def lmmse_error_per_entry(spec, obs):
    """Average posterior variance per unobserved entry."""
    return ColumnLmmse(_covariance(spec), obs.mask).error_per_entry


def _covariance(spec):
    return spec.realized if hasattr(spec, "realized") else np.asarray(spec, dtype=float)


def bsvt_recover(obs, spec, params=None):
    """Recover the stacked matrix from ``obs`` with prior covariance ``spec``."""
    params = params or BsvtParams()
    if obs.n_observed < 1:
        raise InvalidParameterError("observation set is empty")
    lmmse = ColumnLmmse(_covariance(spec), obs.mask)
    d_lmmse = lmmse.error_per_entry if lmmse.n_missing else 0.0
    observed = obs.values
    ref_norm = np.linalg.norm(observed)
    if ref_norm == 0:
        ref_norm = 1.0
    n_entries = observed.size

    y = np.zeros(obs.shape)
    z = np.zeros(obs.shape)
    dec = svd(z)
    tau = 0.0
    residuals, taus = [], []
    clamped = False
    converged = False
    for k in range(1, params.max_iterations + 1):
        x = soft_threshold(z, tau, dec)
        residual = observed_residual(obs, x, ref_norm)
        residuals.append(residual)
        if residual <= params.tolerance:
            converged = True
            break
        y = y + params.step * (observed - obs.project(x))
        z = y + lmmse.complete(y)
        sigma_sq = (np.sum((y - observed) ** 2) + lmmse.n_missing * d_lmmse) / n_entries
        if sigma_sq < SIGMA_FLOOR:
            sigma_sq = SIGMA_FLOOR
            clamped = True
        dec = svd(z)
        tau = optimize_tau(dec, sigma_sq, params.degeneracy_tolerance)
        taus.append(tau)
    return RecoveryResult(x, k, converged, residuals, taus, sigma_clamped=clamped)
