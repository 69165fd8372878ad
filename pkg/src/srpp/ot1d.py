"""One-dimensional optimal-transport kernels and a small-instance
full-dimensional bottleneck oracle.

The 1-D kernels operate on sorted samples: the exact empirical
infinity-Wasserstein distance is the max order-statistic gap, the
p-Wasserstein distance is the quantile-space L_p norm, and the
DKW-robust variant widens the empirical quantile functions by
Dvoretzky-Kiefer-Wolfowitz confidence bands before taking the sup.
"""

import math
from dataclasses import dataclass

import numpy as np

from srpp._kernels import bottleneck_feasible
from srpp.errors import CapacityError, InfeasibleError

_ND_CAPACITY = 512


@dataclass(frozen=True)
class Sorted1DSample:
    """Nondecreasing vector of reals (order statistics of a 1-D sample)."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size < 1:
            raise ValueError("values must be a nonempty 1-D vector")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        if np.any(np.diff(values) < 0):
            raise ValueError("values must be nondecreasing")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_values(cls, values) -> "Sorted1DSample":
        """Sort a raw sample into a Sorted1DSample."""
        return cls(values=np.sort(np.asarray(values, dtype=np.float64)))

    @property
    def n(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class ConfidenceSpec:
    """Per-estimate DKW failure probability and the implied band width."""

    rho: float
    n: int

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        if self.n < 1:
            raise ValueError("n must be a positive integer")

    @property
    def band(self) -> float:
        """Half-width sqrt(log(2/rho) / (2n)), always recomputed."""
        return math.sqrt(math.log(2.0 / self.rho) / (2.0 * self.n))


def w_inf_1d_exact(a: Sorted1DSample, b: Sorted1DSample) -> float:
    """Exact empirical 1-D infinity-Wasserstein: max_k |a_(k) - b_(k)|."""
    if a.n != b.n:
        raise ValueError(f"sample sizes differ: {a.n} vs {b.n}")
    return float(np.max(np.abs(a.values - b.values)))


def w_p_1d(a: Sorted1DSample, b: Sorted1DSample, p: float) -> float:
    """Empirical 1-D p-Wasserstein: ((1/n) sum |a_(k) - b_(k)|^p)^(1/p)."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if a.n != b.n:
        raise ValueError(f"sample sizes differ: {a.n} vs {b.n}")
    gaps = np.abs(a.values - b.values)
    if p == math.inf:
        return float(gaps.max())
    return float(np.mean(gaps**p) ** (1.0 / p))


def _quantile(values: np.ndarray, t: np.ndarray) -> np.ndarray:
    # Left-continuous generalized inverse on a sorted sample: value at
    # index ceil(t * n), with t clamped into (0, 1].
    n = values.size
    idx = np.ceil(np.minimum(t, 1.0) * n).astype(np.int64)
    idx = np.clip(idx, 1, n)
    return values[idx - 1]


def _dkw_directional_sup(
    a: np.ndarray, ea: float, b: np.ndarray, eb: float, lo: float, hi: float
) -> float:
    # sup over t in [lo, hi] of |F_a^-1(t + ea) - F_b^-1(t - eb)| for the
    # piecewise-constant empirical quantile functions.  The sup is
    # attained on the finite set of jump points, so it is evaluated
    # exactly there (plus a left-nudge per candidate to cover the open
    # side of each piece).
    na, nb = a.size, b.size
    jumps_a = (np.arange(1, na + 1) / na) - ea
    jumps_b = (np.arange(0, nb + 1) / nb) + eb
    cand = np.concatenate([jumps_a, jumps_b, [lo, hi]])
    cand = cand[(cand >= lo) & (cand <= hi)]
    cand = np.concatenate([cand, np.maximum(cand - 1e-12, lo)])
    diff = _quantile(a, cand + ea) - _quantile(b, cand - eb)
    return float(np.max(np.abs(diff)))


def w_inf_1d_dkw(a: Sorted1DSample, b: Sorted1DSample, rho: float) -> float:
    """DKW-widened upper bound on the population 1-D infinity-Wasserstein.

    Each sample receives a band e_{n_x}(rho/2); the widened quantile
    difference is maximized over t in [e, 1 - e] with e the larger band,
    in both orderings of the pair.  With probability at least 1 - rho
    (over both conditional samples) the result upper-bounds the
    population distance between the projected distributions; it also
    dominates the empirical distance on equal-size inputs.
    """
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    if a.n < 2 or b.n < 2:
        raise ValueError("DKW estimator needs at least 2 points per sample")
    ea = ConfidenceSpec(rho=rho / 2.0, n=a.n).band
    eb = ConfidenceSpec(rho=rho / 2.0, n=b.n).band
    e = max(ea, eb)
    if e >= 0.5:
        raise InfeasibleError(
            f"DKW band {e:.4f} >= 1/2: samples too small for rho={rho}"
        )
    lo, hi = e, 1.0 - e
    forward = _dkw_directional_sup(a.values, ea, b.values, eb, lo, hi)
    backward = _dkw_directional_sup(b.values, eb, a.values, ea, lo, hi)
    return max(forward, backward)


def w_inf_exact_nd(X: np.ndarray, Y: np.ndarray) -> float:
    """Exact empirical infinity-Wasserstein between uniform point clouds.

    Binary search over the sorted distinct pairwise Euclidean distances
    for the smallest threshold whose bipartite graph admits a perfect
    matching.  Oracle-grade: cubic matching cost, refuses n > 512.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2:
        raise ValueError("X and Y must be n x d matrices")
    if X.shape != Y.shape:
        raise ValueError(f"shape mismatch: {X.shape} vs {Y.shape}")
    n = X.shape[0]
    if n == 0:
        raise ValueError("point clouds must be nonempty")
    if n > _ND_CAPACITY:
        raise CapacityError(f"n={n} exceeds the oracle capacity {_ND_CAPACITY}")
    diff = X[:, None, :] - Y[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    thresholds = np.unique(dist)
    lo, hi = 0, thresholds.size - 1
    if bottleneck_feasible(dist, thresholds[lo]):
        return float(thresholds[lo])
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if bottleneck_feasible(dist, thresholds[mid]):
            hi = mid
        else:
            lo = mid
    return float(thresholds[hi])
