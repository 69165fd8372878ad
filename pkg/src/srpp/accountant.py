"""Cap-based accountants for clipped noisy SGD.

Per-iteration per-slice caps bound the directional shift of the update
between coupled worlds; worst-case caps use a deterministic discrepancy
bound, subsampling-aware caps its second moment.  Summing per-iteration
Gaussian envelope costs yields closed-form noise calibration for a
whole run, and independently trained mechanisms sharing one slice
profile compose additively.
"""

import math
from dataclasses import dataclass

import numpy as np

from srpp.calibrate import NoiseSpec
from srpp.caps import CapEstimate
from srpp.scenario import SliceProfile

MODES = ("ave", "joint", "sa_ave", "sa_joint")


@dataclass(frozen=True)
class SgdHyper:
    """Clipped-SGD hyperparameters used by the accountant and simulator.

    ``lipschitz`` holds the slice-wise Lipschitz constants of the update
    map; for plain SGD (the built-in simulator) this is the step size.
    ``blocks`` optionally lists (block_size, block_clip, block_lipschitz)
    triples for per-layer clipping.
    """

    iterations: int
    clip: float
    batch: int
    lipschitz: float | np.ndarray
    blocks: tuple | None = None

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be a positive integer")
        if not self.clip > 0:
            raise ValueError("clip must be positive")
        if self.batch < 1:
            raise ValueError("batch must be a positive integer")
        lip = np.asarray(self.lipschitz, dtype=np.float64)
        if np.any(lip < 0):
            raise ValueError("lipschitz constants must be nonnegative")
        if self.blocks is not None:
            blocks = tuple((int(d), float(c), float(l)) for d, c, l in self.blocks)
            for d, c, l in blocks:
                if d < 1 or c <= 0 or l < 0:
                    raise ValueError("each block needs size >= 1, clip > 0, L >= 0")
            object.__setattr__(self, "blocks", blocks)

    def step_size(self, t: int) -> float:
        lip = np.asarray(self.lipschitz, dtype=np.float64)
        if lip.ndim == 0:
            return float(lip)
        if lip.ndim == 1 and lip.size == self.iterations:
            return float(lip[t])
        raise ValueError(
            "per-iteration lipschitz must be a scalar or length-T vector"
        )


LEDGER_MODES = ("huc", "sa_huc")


@dataclass(frozen=True)
class HucLedger:
    """Per-iteration cap vectors for one SGD run under a slice profile."""

    mode: str
    caps: np.ndarray
    profile: SliceProfile
    noise_variance: float = 0.0

    def __post_init__(self):
        if self.mode not in LEDGER_MODES:
            raise ValueError(f"mode must be one of {LEDGER_MODES}")
        caps = np.atleast_2d(np.asarray(self.caps, dtype=np.float64))
        if caps.shape[1] != self.profile.m:
            raise ValueError("cap vectors must match the profile length")
        if np.any(caps < 0):
            raise ValueError("cap entries must be nonnegative")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be nonnegative")
        object.__setattr__(self, "caps", caps)


@dataclass(frozen=True)
class BudgetReport:
    """Composition of per-mechanism budgets at a shared order and mode."""

    alpha: float
    epsilons: tuple
    mode: str
    total: float


def huc_from_cap(K: float, B: int, C: float, L) -> np.ndarray:
    """Worst-case per-slice cap (2 K L_i C / B)^2 from a discrepancy cap."""
    if K < 0:
        raise ValueError("K must be nonnegative")
    if B < 1:
        raise ValueError("B must be a positive integer")
    if not C > 0:
        raise ValueError("C must be positive")
    L = np.atleast_1d(np.asarray(L, dtype=np.float64))
    return (2.0 * K * L * C / B) ** 2


def sa_huc_from_k2(k2: float, B: int, C: float, L) -> np.ndarray:
    """Subsampling-aware per-slice cap (2 L_i C / B)^2 * k2 from a
    second-moment discrepancy cap."""
    if k2 < 0:
        raise ValueError("k2 must be nonnegative")
    if B < 1:
        raise ValueError("B must be a positive integer")
    if not C > 0:
        raise ValueError("C must be positive")
    L = np.atleast_1d(np.asarray(L, dtype=np.float64))
    return (2.0 * L * C / B) ** 2 * k2


def _block_projection_sum(blocks, scales, direction) -> float:
    direction = np.asarray(direction, dtype=np.float64)
    sizes = [int(d) for d, *_ in blocks]
    if sum(sizes) != direction.size:
        raise ValueError(
            f"block sizes sum to {sum(sizes)}, direction has {direction.size}"
        )
    total = 0.0
    offset = 0
    for (size, clip, *_), scale in zip(blocks, scales):
        seg = direction[offset : offset + size]
        total += clip * scale * float(np.linalg.norm(seg))
        offset += size
    return total


def huc_blockwise_minimal(K: float, B: int, blocks, scale, direction) -> float:
    """Minimal per-slice cap for blockwise-diagonal linear updates:
    (2K/B)^2 (sum_b C_b ||scale_b * P_b u||)^2.

    ``blocks`` lists (block_size, block_clip) pairs and ``scale`` the
    per-block diagonal coefficients of the update map.
    """
    if K < 0:
        raise ValueError("K must be nonnegative")
    if B < 1:
        raise ValueError("B must be a positive integer")
    blocks = [(int(d), float(c)) for d, c in blocks]
    scales = [float(s) for s in scale]
    if len(scales) != len(blocks):
        raise ValueError("scale must list one coefficient per block")
    inner = _block_projection_sum(blocks, scales, direction)
    return (2.0 * K / B) ** 2 * inner**2


def perlayer_caps(
    cap: CapEstimate, hyper: SgdHyper, direction, mode: str = "worst"
) -> float:
    """Per-slice cap under per-layer clipping.

    worst: (2 K / B)^2 (sum_l C_l L_l ||P_l u||)^2 with K = tail_cap;
    sa: the same with K^2 replaced by ms_cap.
    """
    if mode not in ("worst", "sa"):
        raise ValueError("mode must be 'worst' or 'sa'")
    if hyper.blocks is None:
        raise ValueError("perlayer_caps needs hyper.blocks")
    blocks = [(d, c) for d, c, _ in hyper.blocks]
    scales = [l for _, _, l in hyper.blocks]
    inner = _block_projection_sum(blocks, scales, direction)
    factor = cap.tail_cap**2 if mode == "worst" else cap.ms_cap
    return (2.0 / hyper.batch) ** 2 * factor * inner**2


def per_iteration_cost(h_i, sigma2, alpha: float):
    """Per-slice per-iteration Renyi cost (alpha/2) h_i / v_i.

    Accepts scalars or arrays; a per-slice variance vector may be passed
    for non-isotropic noise.  Zero variance against a positive cap
    signals infinite cost.
    """
    if not alpha > 1.0:
        raise ValueError("alpha must be strictly greater than 1")
    h = np.asarray(h_i, dtype=np.float64)
    v = np.asarray(sigma2, dtype=np.float64)
    if np.any(h < 0):
        raise ValueError("caps must be nonnegative")
    if np.any(v < 0):
        raise ValueError("variances must be nonnegative")
    with np.errstate(divide="ignore", invalid="ignore"):
        cost = np.where(h == 0.0, 0.0, 0.5 * alpha * h / v)
    if cost.ndim == 0:
        return float(cost)
    return cost


def _aggregate(ledger_caps, profile: SliceProfile, mode: str) -> float:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    caps = np.atleast_2d(np.asarray(ledger_caps, dtype=np.float64))
    if caps.shape[1] != profile.m:
        raise ValueError("cap vectors must match the profile length")
    if np.any(caps < 0):
        raise ValueError("cap entries must be nonnegative")
    if mode in ("ave", "sa_ave"):
        return float(np.sum(caps @ profile.weights))
    return float(np.sum(caps.max(axis=1)))


def sigma_for_budget(
    ledger_caps, profile: SliceProfile, alpha: float, epsilon: float, mode: str
) -> NoiseSpec:
    """Smallest certified isotropic variance for a full cap ledger:
    (alpha / 2 epsilon) times the weighted (ave) or worst-slice (joint)
    cap total."""
    if not alpha > 1.0:
        raise ValueError("alpha must be strictly greater than 1")
    if not epsilon > 0.0:
        raise ValueError("epsilon must be positive")
    total = _aggregate(ledger_caps, profile, mode)
    return NoiseSpec(sigma2=alpha * total / (2.0 * epsilon), dim=profile.dim)


def budget_for_sigma(
    ledger_caps, profile: SliceProfile, alpha: float, sigma2: float, mode: str
) -> float:
    """Smallest budget certified at a given variance; exact inverse of
    sigma_for_budget.  Zero variance with nonzero caps signals infinity."""
    if not alpha > 1.0:
        raise ValueError("alpha must be strictly greater than 1")
    if sigma2 < 0:
        raise ValueError("sigma2 must be nonnegative")
    total = _aggregate(ledger_caps, profile, mode)
    if sigma2 == 0.0:
        return 0.0 if total == 0.0 else math.inf
    return alpha * total / (2.0 * sigma2)


def compose(budgets) -> BudgetReport:
    """Additive composition of mechanisms sharing alpha, mode, and (by
    contract) the slice profile.  Mixed orders or modes are rejected."""
    entries = [(float(a), float(e), str(m)) for a, e, m in budgets]
    if not entries:
        raise ValueError("budgets must be nonempty")
    alpha, _, mode = entries[0]
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    for a, e, m in entries:
        if a != alpha or m != mode:
            raise ValueError("composition requires a common alpha and mode")
        if e < 0:
            raise ValueError("epsilons must be nonnegative")
    eps = tuple(e for _, e, _ in entries)
    return BudgetReport(alpha=alpha, epsilons=eps, mode=mode, total=float(sum(eps)))
