"""Spectral primitives: thin SVD, truncation, effective rank, NMSE, shrinkage."""

from dataclasses import dataclass

import numpy as np

from jointmc.errors import ConvergenceError, InvalidParameterError, ShapeError

DEFAULT_RANK_TOLERANCE = 1e-3


@dataclass(frozen=True)
class SpectralDecomposition:
    """Thin SVD ``matrix = left_vectors @ diag(singular_values) @ right_vectors.T``."""

    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray

    @property
    def shape(self):
        return (self.left_vectors.shape[0], self.right_vectors.shape[0])

    def reconstruct(self, values=None):
        """Rebuild the matrix, optionally with replacement singular values."""
        s = self.singular_values if values is None else np.asarray(values)
        return (self.left_vectors * s) @ self.right_vectors.T


def _as_matrix(matrix):
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D array, got shape {a.shape}")
    return a


def svd(matrix):
    """Thin SVD of a tall (rows >= cols) matrix.

    Singular values come back in descending order. Each left singular vector
    is flipped so that its largest-magnitude entry is nonnegative, with the
    matching right vector flipped alongside, which makes the output
    deterministic for a given input.
    """
    a = _as_matrix(matrix)
    rows, cols = a.shape
    if rows < cols:
        raise ShapeError(f"expected rows >= cols, got {rows}x{cols}")
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"SVD did not converge: {exc}") from exc
    v = vt.T
    pivot = np.argmax(np.abs(u), axis=0)
    signs = np.where(u[pivot, np.arange(u.shape[1])] < 0, -1.0, 1.0)
    return SpectralDecomposition(u * signs, s, v * signs)


def truncate(matrix, rank):
    """Best rank-``rank`` approximation in Frobenius norm."""
    a = _as_matrix(matrix)
    n = a.shape[1]
    if not 0 <= rank <= n:
        raise InvalidParameterError(f"rank {rank} outside [0, {n}]")
    dec = svd(a)
    values = dec.singular_values.copy()
    values[rank:] = 0.0
    return dec.reconstruct(values)


def effective_rank(matrix, tolerance=DEFAULT_RANK_TOLERANCE):
    """Smallest ``r`` whose rank-``r`` truncation has NMSE below ``tolerance``.

    Uses the tail-energy form: the NMSE of the rank-``r`` truncation is
    ``sum(s[r:]**2) / sum(s**2)``.
    """
    a = _as_matrix(matrix)
    if a.shape[0] < a.shape[1]:
        a = a.T
    s = np.linalg.svd(a, compute_uv=False)
    return rank_from_singular_values(s, tolerance)


def rank_from_singular_values(singular_values, tolerance=DEFAULT_RANK_TOLERANCE):
    energy = np.asarray(singular_values, dtype=float) ** 2
    total = energy.sum()
    if total == 0.0:
        raise InvalidParameterError("effective rank undefined for the zero matrix")
    # tail[r] = energy left after keeping the first r values
    tail = np.concatenate([np.cumsum(energy[::-1])[::-1], [0.0]])
    return int(np.flatnonzero(tail < tolerance * total)[0])


def nmse(reference, estimate):
    """Squared Frobenius error normalised by the reference energy."""
    ref = np.asarray(reference, dtype=float)
    est = np.asarray(estimate, dtype=float)
    if ref.shape != est.shape:
        raise ShapeError(f"shape mismatch: {ref.shape} vs {est.shape}")
    denom = np.sum(ref**2)
    if denom == 0.0:
        raise InvalidParameterError("NMSE undefined for a zero reference")
    return float(np.sum((ref - est) ** 2) / denom)


def soft_threshold(matrix, tau, decomposition=None):
    """Singular value shrinkage ``U diag(max(s - tau, 0)) V^T``.

    A precomputed ``decomposition`` of ``matrix`` may be passed to skip the SVD.
    """
    if tau < 0:
        raise InvalidParameterError(f"tau must be nonnegative, got {tau}")
    dec = decomposition if decomposition is not None else svd(matrix)
    return dec.reconstruct(np.maximum(dec.singular_values - tau, 0.0))
