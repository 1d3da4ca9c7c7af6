"""Observation-count limits for independent and joint recovery.

A rank-``r`` ``m x n`` matrix is recoverable from ``k`` entries when
``k > (m + n - r) r``. Stacking two ``M x N`` datasets gives a ``2M x N``
matrix whose rank ``r`` obeys ``max(r1, r2) <= r <= r1 + r2``, so joint
recovery needs ``k1 + k2 > (2M + N - r) r``. All threshold arithmetic is
exact integer arithmetic; boundary points count as infeasible.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

from jointmc.errors import InvalidParameterError

# Stable labels for the boolean triple (dataset 1 alone, dataset 2 alone, joint).
# Only R4 and R7 carry meaning from the region diagram; the rest are internal.
REGION_LABELS = {
    (True, True, True): "R4",
    (False, False, True): "R7",
    (True, False, True): "R-A",
    (False, True, True): "R-B",
    (False, False, False): "R-C",
    (True, False, False): "R-D",
    (False, True, False): "R-E",
    (True, True, False): "R-F",
}

# Relabelling when the two datasets swap roles.
MIRROR = {
    "R4": "R4",
    "R7": "R7",
    "R-A": "R-B",
    "R-B": "R-A",
    "R-C": "R-C",
    "R-D": "R-E",
    "R-E": "R-D",
    "R-F": "R-F",
}


@dataclass(frozen=True)
class ProblemDims:
    m: int
    n: int
    r1: int
    r2: int
    r: int

    def __post_init__(self):
        if not (1 <= self.r1 <= min(self.m, self.n) and 1 <= self.r2 <= min(self.m, self.n)):
            raise InvalidParameterError(
                f"individual ranks ({self.r1}, {self.r2}) outside [1, {min(self.m, self.n)}]"
            )
        upper = min(self.r1 + self.r2, 2 * self.m, self.n)
        if not max(self.r1, self.r2) <= self.r <= upper:
            raise InvalidParameterError(
                f"combined rank {self.r} outside [{max(self.r1, self.r2)}, {upper}]"
            )

    def swapped(self):
        return ProblemDims(self.m, self.n, self.r2, self.r1, self.r)


@dataclass(frozen=True)
class RegionReport:
    t1: int
    t2: int
    tj: int
    independent1_feasible: bool
    independent2_feasible: bool
    joint_feasible: bool

    @property
    def flags(self):
        return (self.independent1_feasible, self.independent2_feasible, self.joint_feasible)

    @property
    def region_label(self):
        return REGION_LABELS[self.flags]

    @property
    def flag_string(self):
        return "".join("T" if f else "F" for f in self.flags)


def rank_bounds(r1, r2):
    if r1 < 0 or r2 < 0:
        raise InvalidParameterError("ranks must be nonnegative")
    return max(r1, r2), r1 + r2


def independent_threshold(m, n, rank):
    if not 1 <= rank <= min(m, n):
        raise InvalidParameterError(f"rank {rank} outside [1, {min(m, n)}]")
    return (m + n - rank) * rank


def joint_threshold(m, n, r):
    if not 1 <= r <= min(2 * m, n):
        raise InvalidParameterError(f"rank {r} outside [1, {min(2 * m, n)}]")
    return (2 * m + n - r) * r


def classify_region(k1, k2, dims):
    if k1 < 0 or k2 < 0:
        raise InvalidParameterError("observation counts must be nonnegative")
    t1 = independent_threshold(dims.m, dims.n, dims.r1)
    t2 = independent_threshold(dims.m, dims.n, dims.r2)
    tj = joint_threshold(dims.m, dims.n, dims.r)
    return RegionReport(t1, t2, tj, k1 > t1, k2 > t2, k1 + k2 > tj)


def beneficial_necessary(dims):
    """``1 - max(r1, r2)/min(r1, r2) > (min(r1, r2) - N)/M``, evaluated exactly."""
    lo, hi = sorted((dims.r1, dims.r2))
    return 1 - Fraction(hi, lo) > Fraction(lo - dims.n, dims.m)


def beneficial_rank_bound(dims):
    """Largest combined rank (exclusive) for which joint recovery needs fewer samples.

    Closed form ``M + N/2 - (1/2) D sqrt(1 + (3M^2 + 2MN - 8 r1 r2) / D^2)`` with
    ``D = M + N - 2 r1 - 2 r2``. The closed form is the smaller root of the
    benefit quadratic only for ``D > 0``; at ``D = 0`` it is singular and for
    ``D < 0`` it picks the larger root, so both cases use
    :func:`smaller_root_bound` instead.
    """
    m, n, r1, r2 = dims.m, dims.n, dims.r1, dims.r2
    d = m + n - 2 * r1 - 2 * r2
    if d <= 0:
        return smaller_root_bound(dims)
    return m + n / 2 - 0.5 * d * math.sqrt(1 + (3 * m * m + 2 * m * n - 8 * r1 * r2) / d**2)


def smaller_root_bound(dims):
    """Smaller root of ``r^2 - (2M + N) r + t1 + t2 = 0``."""
    m, n, r1, r2 = dims.m, dims.n, dims.r1, dims.r2
    b = 2 * m + n
    c = (m + n - r1) * r1 + (m + n - r2) * r2
    return (b - math.sqrt(b * b - 4 * c)) / 2


def below_rank_bound(dims):
    """Exact test of ``dims.r < beneficial_rank_bound(dims)``.

    ``r`` lies strictly below the smaller root of
    ``q(r) = r^2 - (2M + N) r + t1 + t2`` iff ``q(r) > 0`` and ``r`` is left of
    the vertex. Integer arithmetic avoids misclassifying ranks that sit
    exactly on an integer root, where the floating-point bound can land a
    few ulps high.
    """
    m, n, r1, r2, r = dims.m, dims.n, dims.r1, dims.r2, dims.r
    b = 2 * m + n
    c = (m + n - r1) * r1 + (m + n - r2) * r2
    return 2 * r < b and r * r - b * r + c > 0


def is_beneficial(dims):
    """Necessary condition holds and ``dims.r`` is below the rank bound."""
    return beneficial_necessary(dims) and below_rank_bound(dims)


def r7_nonempty(dims):
    """True iff some integer ``(k1, k2)`` has neither dataset but the stack recoverable."""
    t1 = independent_threshold(dims.m, dims.n, dims.r1)
    t2 = independent_threshold(dims.m, dims.n, dims.r2)
    return t1 + t2 > joint_threshold(dims.m, dims.n, dims.r)


def r7_nonempty_scan(dims):
    """Brute-force :func:`r7_nonempty`: scan every ``k1 <= t1``, ``k2 <= t2``."""
    t1 = independent_threshold(dims.m, dims.n, dims.r1)
    t2 = independent_threshold(dims.m, dims.n, dims.r2)
    tj = joint_threshold(dims.m, dims.n, dims.r)
    for k1 in range(t1 + 1):
        for k2 in range(t2 + 1):
            if k1 + k2 > tj:
                return True
    return False


def threshold_lines(dims, samples=101):
    """Points on the three threshold lines, for overlaying on a ``(k1, k2)`` plot.

    Rows are ``(line, k1, k2)`` with ``line`` one of ``t1``, ``t2``, ``tj``.
    The axis range is ``[0, M N]`` per dataset.
    """
    t1 = independent_threshold(dims.m, dims.n, dims.r1)
    t2 = independent_threshold(dims.m, dims.n, dims.r2)
    tj = joint_threshold(dims.m, dims.n, dims.r)
    top = dims.m * dims.n
    axis = [round(i * top / (samples - 1)) for i in range(samples)]
    rows = [("t1", t1, k) for k in axis]
    rows += [("t2", k, t2) for k in axis]
    rows += [("tj", k, tj - k) for k in axis if 0 <= tj - k <= top]
    return rows
