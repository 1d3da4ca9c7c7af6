"""Block-Toeplitz source model for two correlated datasets.

Each dataset has ``M`` rows (time instants) and ``N`` columns (feeders). Every
column of the stacked ``2M x N`` matrix is an independent draw from
``N(0, Sigma)`` with::

    Sigma = [[S11,       psi * S11],
             [psi * S11, S22      ]]

(or, with ``cross_block=2``, the off-diagonal blocks scaled from ``S22``),
where ``S_ll`` is the symmetric Toeplitz matrix with entries
``b_ll ** |i - j|`` and ``b_ll = tail_correlation ** (1 / (M - 1))`` so that
the correlation between the first and last row equals ``tail_correlation``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigvalsh, toeplitz

from jointmc.errors import CalibrationError, InvalidParameterError, NotPositiveSemidefiniteError
from jointmc.matrix_ops import effective_rank
from jointmc.seeding import generator

PIVOT_TOLERANCE = 1e-10
CALIBRATION_STEPS = 60


@dataclass(frozen=True)
class ToeplitzBlockSpec:
    size: int
    tail_correlation: float

    @property
    def base(self):
        """Lag-one correlation."""
        return self.tail_correlation ** (1.0 / (self.size - 1))

    @property
    def matrix(self):
        lags = np.arange(self.size)
        column = self.tail_correlation ** (lags / (self.size - 1))
        return toeplitz(column)


@dataclass(frozen=True, eq=False)
class CovarianceSpec:
    block1: ToeplitzBlockSpec
    block2: ToeplitzBlockSpec
    cross_scale: float
    realized: np.ndarray
    factor: np.ndarray
    cross_block: int = 1

    @property
    def size(self):
        return self.block1.size

    @property
    def dim(self):
        return 2 * self.block1.size


@dataclass(frozen=True, eq=False)
class DatasetPair:
    m1: np.ndarray
    m2: np.ndarray
    stacked: np.ndarray
    r1: int
    r2: int
    r: int

    @property
    def rank_bounds_hold(self):
        return max(self.r1, self.r2) <= self.r <= self.r1 + self.r2


def build_toeplitz_block(size, tail_correlation):
    if int(size) != size or size < 2:
        raise InvalidParameterError(f"block size must be an integer >= 2, got {size}")
    if not 0.0 <= tail_correlation < 1.0:
        raise InvalidParameterError(
            f"tail correlation must lie in [0, 1), got {tail_correlation}"
        )
    return ToeplitzBlockSpec(int(size), float(tail_correlation))


def semidefinite_cholesky(matrix, tolerance=PIVOT_TOLERANCE):
    """Lower-triangular ``L`` with ``L @ L.T == matrix`` for PSD input.

    Pivots below ``tolerance * max(diag)`` are treated as zero and their
    columns left empty, which admits rank-deficient matrices. The
    factorization runs in the natural row order so ``L`` stays lower
    triangular.

    Raises
    ------
    NotPositiveSemidefiniteError
        With the 1-based index of the leading minor at which a negative pivot
        (or a zero pivot with a nonzero off-diagonal column) shows up.
    """
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    tol = tolerance * max(np.max(np.diag(a)), 0.0)
    lower = np.zeros_like(a)
    for k in range(n):
        pivot = a[k, k]
        if pivot > tol:
            col = a[k:, k] / np.sqrt(pivot)
            lower[k:, k] = col
            a[k + 1 :, k + 1 :] -= np.outer(col[1:], col[1:])
            continue
        if pivot < -tol:
            raise NotPositiveSemidefiniteError(
                f"negative pivot {pivot:.3e} at leading minor {k + 1}", k + 1
            )
        # a PSD matrix with a vanishing diagonal entry has |a_jk| <= sqrt(a_jj * a_kk)
        bound = 2.0 * np.sqrt(np.maximum(np.diag(a)[k + 1 :], tol) * max(tol, pivot, 0.0))
        if np.any(np.abs(a[k + 1 :, k]) > bound + tol):
            raise NotPositiveSemidefiniteError(
                f"zero pivot with nonzero coupling at leading minor {k + 1}", k + 1
            )
    return lower


def build_joint_covariance(block1, block2, cross_scale, cross_block=1):
    """Assemble and factor the ``2M x 2M`` joint covariance.

    ``cross_block`` selects which diagonal block, scaled by ``cross_scale``,
    fills the off-diagonal blocks.
    """
    if block1.size != block2.size:
        raise InvalidParameterError(
            f"block sizes differ: {block1.size} vs {block2.size}"
        )
    if not 0.0 <= cross_scale <= 1.0:
        raise InvalidParameterError(f"cross scale must lie in [0, 1], got {cross_scale}")
    if cross_block not in (1, 2):
        raise InvalidParameterError(f"cross_block must be 1 or 2, got {cross_block}")
    s11 = block1.matrix
    s22 = block2.matrix
    cross = cross_scale * (s11 if cross_block == 1 else s22)
    realized = np.block([[s11, cross], [cross, s22]])
    factor = semidefinite_cholesky(realized)
    return CovarianceSpec(block1, block2, float(cross_scale), realized, factor, cross_block)


def covariance_from_parameters(size, upsilon11, upsilon22, psi, cross_block=1):
    return build_joint_covariance(
        build_toeplitz_block(size, upsilon11),
        build_toeplitz_block(size, upsilon22),
        psi,
        cross_block,
    )


def max_cross_scale(block1, block2, cross_block=1):
    """Largest ``psi`` in [0, 1] keeping the joint covariance PSD.

    With ``cross_block=1`` the Schur complement is ``S22 - psi**2 S11``, PSD
    iff ``psi**2`` is at most the smallest generalized eigenvalue of
    ``(S22, S11)``.
    """
    s11, s22 = block1.matrix, block2.matrix
    if cross_block == 2:
        s11, s22 = s22, s11
    smallest = eigvalsh(s22, s11, subset_by_index=[0, 0])[0]
    return float(min(1.0, np.sqrt(max(smallest, 0.0))))


def sample_columns(spec, n_columns, seed):
    """Draw ``n_columns`` i.i.d. ``N(0, Sigma)`` columns as ``factor @ z``.

    ``z`` is a ``2M x N`` standard normal array filled row-major from the
    seeded generator, so its first ``M`` rows coincide with the draw
    ``calibrate_tail`` makes for the same seed.
    """
    if int(n_columns) != n_columns or n_columns < 1:
        raise InvalidParameterError(f"n_columns must be a positive integer, got {n_columns}")
    z = generator(seed).standard_normal((spec.dim, int(n_columns)))
    stacked = spec.factor @ z
    return make_pair(stacked)


def make_pair(stacked):
    """Split a ``2M x N`` stack into its datasets and record effective ranks."""
    stacked = np.asarray(stacked, dtype=float)
    m = stacked.shape[0] // 2
    m1, m2 = stacked[:m], stacked[m:]
    return DatasetPair(
        m1=m1,
        m2=m2,
        stacked=stacked,
        r1=effective_rank(m1),
        r2=effective_rank(m2),
        r=effective_rank(stacked),
    )


def _achieving_midpoint(rank, target, lo=0.0, hi=1.0, steps=CALIBRATION_STEPS):
    """Midpoint of the parameter interval on which a non-increasing ``rank`` hits ``target``.

    Returns None if the bisected interval does not reproduce the target.
    """
    a, b = lo, hi
    for _ in range(steps):
        mid = 0.5 * (a + b)
        if rank(mid) > target:
            a = mid
        else:
            b = mid
    lower_edge = b
    a, b = lower_edge, hi
    for _ in range(steps):
        mid = 0.5 * (a + b)
        if rank(mid) >= target:
            a = mid
        else:
            b = mid
    for candidate in (0.5 * (lower_edge + a), lower_edge):
        if rank(candidate) == target:
            return candidate
    return None


def _block_rank(tail, size, z):
    factor = semidefinite_cholesky(build_toeplitz_block(size, tail).matrix)
    return effective_rank(factor @ z)


def calibrate_tail(target_rank, size, n_columns, seed):
    """Tail correlation whose sampled block has the requested effective rank.

    The rank of one fixed-seed ``size x n_columns`` sample is non-increasing
    in the tail correlation (in practice), so both edges of the interval of
    tails that achieve ``target_rank`` are located by bisection and the
    midpoint returned. A 200-point scan is the fallback when bisection does
    not bracket the target.
    """
    if not 1 <= target_rank <= min(size, n_columns):
        raise InvalidParameterError(
            f"target rank {target_rank} outside [1, {min(size, n_columns)}]"
        )
    z = generator(seed).standard_normal((size, n_columns))

    def rank(tail):
        return _block_rank(tail, size, z)

    found = _achieving_midpoint(rank, target_rank, hi=1.0 - 1e-12)
    if found is not None:
        return found
    grid = np.linspace(0.0, 1.0, 201)[:-1]
    hits = [t for t in grid if rank(t) == target_rank]
    if hits:
        return float(0.5 * (hits[0] + hits[-1]))
    raise CalibrationError(
        f"no tail correlation gives effective rank {target_rank} "
        f"for a {size}x{n_columns} sample"
    )


# psi as a fraction of its PSD limit; dense near 1 where the stacked rank moves
RAY_FRACTIONS = (0.0, 0.5, 0.75, 0.9, 0.95, 0.98, 0.99, 0.995, 0.998, 0.999)
JOINT_STEPS = 40


@dataclass(frozen=True)
class JointCalibration:
    upsilon11: float
    upsilon22: float
    psi: float
    cross_block: int
    r1: int
    r2: int
    r: int

    def spec(self, size):
        return covariance_from_parameters(
            size, self.upsilon11, self.upsilon22, self.psi, self.cross_block
        )


def calibrate_joint(size, n_columns, target_r1, target_r2, target_r, seed):
    """Model parameters whose fixed-seed joint sample has ranks ``(r1, r2, r)``.

    ``upsilon11`` comes from :func:`calibrate_tail`. Then, for each cross
    layout and each ray ``psi = f * max_cross_scale``, ``upsilon22`` is
    bisected to hit ``target_r2`` on the joint sample and the stacked rank
    checked. The middle ray among the hits is returned.
    """
    lo_r = max(target_r1, target_r2)
    if not lo_r <= target_r <= min(target_r1 + target_r2, 2 * size, n_columns):
        raise InvalidParameterError(
            f"target ranks ({target_r1}, {target_r2}, {target_r}) violate the stacked-rank bounds"
        )
    u11 = calibrate_tail(target_r1, size, n_columns, seed)
    block1 = build_toeplitz_block(size, u11)
    z = generator(seed).standard_normal((2 * size, n_columns))

    for cross_block in (1, 2):
        hits = []
        for frac in RAY_FRACTIONS:

            def sample(u22):
                block2 = build_toeplitz_block(size, u22)
                psi = frac * max_cross_scale(block1, block2, cross_block)
                x = build_joint_covariance(block1, block2, psi, cross_block).factor @ z
                return psi, x

            try:
                u22 = _achieving_midpoint(
                    lambda u: effective_rank(sample(u)[1][size:]),
                    target_r2,
                    hi=1.0 - 1e-12,
                    steps=JOINT_STEPS,
                )
                if u22 is None:
                    continue
                psi, x = sample(u22)
            except NotPositiveSemidefiniteError:
                continue
            pair = make_pair(x)
            if (pair.r1, pair.r2, pair.r) == (target_r1, target_r2, target_r):
                hits.append(
                    JointCalibration(u11, u22, psi, cross_block, pair.r1, pair.r2, pair.r)
                )
        if hits:
            return hits[len(hits) // 2]
    raise CalibrationError(
        f"no (upsilon22, psi) reaches ranks ({target_r1}, {target_r2}, {target_r}) "
        f"for seed {seed}"
    )
