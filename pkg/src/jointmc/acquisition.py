"""Noisy, partial observation of the two datasets.

Each dataset is corrupted by white Gaussian noise, a uniform random subset
of its entries is kept, and the two observed matrices are stacked. Noise is
added to every entry before masking, so unobserved entries are noisy too
(they are simply never seen).
"""

from dataclasses import dataclass

import numpy as np

from jointmc.errors import InvalidParameterError
from jointmc.seeding import SubSeeds, generator, split_seed


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """Observed entries of the stacked ``2M x N`` matrix.

    ``mask`` is the boolean indicator of the combined index set; rows
    ``0..M-1`` belong to dataset 1 and rows ``M..2M-1`` to dataset 2.
    ``values`` holds the noisy observations on the mask and zeros elsewhere.
    """

    mask: np.ndarray
    values: np.ndarray
    noise_sigma1: float = 0.0
    noise_sigma2: float = 0.0

    @property
    def shape(self):
        return self.mask.shape

    @property
    def m(self):
        return self.mask.shape[0] // 2

    @property
    def omega1(self):
        rows, cols = np.nonzero(self.mask[: self.m])
        return np.column_stack([rows, cols])

    @property
    def omega2(self):
        rows, cols = np.nonzero(self.mask[self.m :])
        return np.column_stack([rows + self.m, cols])

    @property
    def k1(self):
        return int(self.mask[: self.m].sum())

    @property
    def k2(self):
        return int(self.mask[self.m :].sum())

    @property
    def n_observed(self):
        return int(self.mask.sum())

    @property
    def n_missing(self):
        return self.mask.size - self.n_observed

    @property
    def sampling_fraction(self):
        return self.n_observed / self.mask.size

    def project(self, matrix):
        """Zero every entry outside the observed set."""
        return np.where(self.mask, matrix, 0.0)


def snr_to_sigma(block, snr_db):
    """Noise standard deviation giving ``snr_db`` for a Toeplitz block.

    Signal power is ``trace(S_ll) / M``, which is 1 for the unit-diagonal
    Toeplitz blocks. ``snr_db = inf`` gives a noiseless channel.
    """
    power = np.trace(block.matrix) / block.size
    if np.isinf(snr_db) and snr_db > 0:
        return 0.0
    return float(np.sqrt(power * 10.0 ** (-snr_db / 10.0)))


def add_noise(matrix, sigma, seed):
    if sigma < 0:
        raise InvalidParameterError(f"sigma must be nonnegative, got {sigma}")
    matrix = np.asarray(matrix, dtype=float)
    if sigma == 0:
        return matrix.copy()
    return matrix + sigma * generator(seed).standard_normal(matrix.shape)


def sample_mask(rows, cols, k, seed):
    """Boolean ``rows x cols`` mask with exactly ``k`` cells drawn uniformly without replacement."""
    total = rows * cols
    if not 0 <= k <= total:
        raise InvalidParameterError(f"k={k} outside [0, {total}]")
    picked = generator(seed).choice(total, size=int(k), replace=False, shuffle=False)
    mask = np.zeros(total, dtype=bool)
    mask[picked] = True
    return mask.reshape(rows, cols)


def acquire(pair, k1, k2, sigma1, sigma2, seed):
    """Noisy observations of ``k1`` entries of dataset 1 and ``k2`` of dataset 2.

    ``seed`` is either an integer, split into four sub-seeds with
    :func:`jointmc.seeding.split_seed`, or an explicit :class:`SubSeeds`.
    """
    seeds = seed if isinstance(seed, SubSeeds) else split_seed(seed)
    m, n = pair.m1.shape
    r1 = add_noise(pair.m1, sigma1, seeds.noise1)
    r2 = add_noise(pair.m2, sigma2, seeds.noise2)
    mask = np.vstack(
        [sample_mask(m, n, k1, seeds.mask1), sample_mask(m, n, k2, seeds.mask2)]
    )
    values = np.where(mask, np.vstack([r1, r2]), 0.0)
    return ObservationSet(mask, values, float(sigma1), float(sigma2))
