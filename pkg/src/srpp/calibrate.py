"""Gaussian noise calibration for sliced Renyi guarantees.

Closed-form variance for the average and worst-slice aggregations,
PAC finite-sample variants (Hoeffding-corrected mean, bisection for the
joint log-moment condition), sliced divergence evaluation for isotropic
Gaussians, Renyi-to-(eps, delta) conversion, a prior-free group
baseline, and the privatization step itself.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from srpp.errors import InfeasibleError
from srpp.rng import rng_stream
from srpp.sensitivity import SensitivityProfile, ave_ucb

_MODES = ("ave", "joint", "ave_pac", "joint_pac")

_SIGMA_FLOOR = 1e-8
_BISECT_RTOL = 1e-10
_MAX_DOUBLINGS = 200


@dataclass(frozen=True)
class CalibrationSpec:
    """Target Renyi order, budget, and optional PAC failure probability."""

    alpha: float
    epsilon: float
    mode: str
    gamma: float | None = None

    def __post_init__(self):
        if not self.alpha > 1.0:
            raise ValueError("alpha must be strictly greater than 1")
        if not self.epsilon > 0.0:
            raise ValueError("epsilon must be positive")
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}")
        if self.gamma is not None and not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")


@dataclass(frozen=True)
class NoiseSpec:
    """Isotropic Gaussian noise: variance sigma2 per coordinate in R^dim.

    sigma2 = 0 is legal (zero sensitivity releases unperturbed); callers
    surface a warning in reports.
    """

    sigma2: float
    dim: int

    def __post_init__(self):
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be nonnegative")
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)


@dataclass(frozen=True)
class DivergenceReport:
    """Ave/Joint sliced divergences, optionally the unsliced value."""

    ave: float
    joint: float
    per_slice: np.ndarray
    full: float | None = None

    def __post_init__(self):
        object.__setattr__(
            self, "per_slice", np.asarray(self.per_slice, dtype=np.float64)
        )
        if self.ave > self.joint + 1e-9:
            raise ValueError("ave divergence exceeds joint divergence")
        if self.full is not None and self.joint > self.full + 1e-9:
            raise ValueError("joint divergence exceeds the unsliced divergence")


def renyi_gaussian_shift(shift: float, sigma2: float, alpha: float) -> float:
    """Renyi divergence of order alpha between N(shift, s2) and N(0, s2).

    Returns alpha * shift^2 / (2 sigma2); infinity when sigma2 = 0 with
    a nonzero shift (distinct signal, not an exception).
    """
    if not alpha > 1.0:
        raise ValueError("alpha must be strictly greater than 1")
    if sigma2 < 0:
        raise ValueError("sigma2 must be nonnegative")
    if sigma2 == 0.0:
        return 0.0 if shift == 0.0 else math.inf
    return alpha * shift * shift / (2.0 * sigma2)


def calibrate_ave(mean_square: float, spec: CalibrationSpec, dim: int = 1) -> NoiseSpec:
    """Variance alpha * mean_square / (2 epsilon) for the average bound."""
    if spec.mode != "ave":
        raise ValueError("spec.mode must be 'ave'")
    if mean_square < 0:
        raise ValueError("mean_square must be nonnegative")
    return NoiseSpec(sigma2=spec.alpha * mean_square / (2.0 * spec.epsilon), dim=dim)


def calibrate_joint(worst: float, spec: CalibrationSpec, dim: int = 1) -> NoiseSpec:
    """Variance alpha * worst / (2 epsilon) for the worst-slice bound."""
    if spec.mode != "joint":
        raise ValueError("spec.mode must be 'joint'")
    if worst < 0:
        raise ValueError("worst must be nonnegative")
    return NoiseSpec(sigma2=spec.alpha * worst / (2.0 * spec.epsilon), dim=dim)


def calibrate_ave_pac(
    profile: SensitivityProfile, spec: CalibrationSpec, m: int
) -> NoiseSpec:
    """Finite-sample average calibration over m i.i.d. directions.

    sigma2 = (alpha / 2 epsilon) * [mean of squared estimates +
    delta0^2 sqrt(log(4/gamma) / (2m))]; the guarantee holds with
    probability at least 1 - gamma.
    """
    if spec.mode != "ave_pac":
        raise ValueError("spec.mode must be 'ave_pac'")
    if spec.gamma is None:
        raise ValueError("ave_pac calibration needs spec.gamma")
    ucb = ave_ucb(profile, spec.gamma, m)
    sigma2 = spec.alpha * ucb / (2.0 * spec.epsilon)
    return NoiseSpec(sigma2=sigma2, dim=profile.profile.dim)


def joint_pac_condition(
    sigma: float,
    per_slice: np.ndarray,
    delta0: float,
    alpha: float,
    gamma: float,
    m: int,
) -> float:
    """Left-hand side of the finite-sample joint calibration condition.

    Phi(sigma) = (1/(alpha-1)) log( mean_l exp(c d_l^2)
                 + (exp(c delta0^2) - 1) sqrt(log(4/gamma)/(2m)) )
    with c = alpha (alpha-1) / (2 sigma^2), computed in log space so
    large exponents cannot overflow.  Strictly decreasing in sigma when
    delta0 > 0.
    """
    per_slice = np.asarray(per_slice, dtype=np.float64)
    c = alpha * (alpha - 1.0) / (2.0 * sigma * sigma)
    h = math.sqrt(math.log(4.0 / gamma) / (2.0 * m))
    # log(mean exp(c d^2) + h exp(c delta0^2)) via logsumexp, then
    # subtract the residual h to recover mean + (b - 1) h exactly.
    terms = np.concatenate(
        [c * per_slice**2 - math.log(m), [c * delta0 * delta0 + math.log(h)]]
    )
    s = float(logsumexp(terms))
    return (s + math.log1p(-h * math.exp(-s))) / (alpha - 1.0)


def calibrate_joint_pac(
    profile: SensitivityProfile, spec: CalibrationSpec, m: int
) -> NoiseSpec:
    """Smallest sigma (relative tolerance 1e-10) meeting the joint
    finite-sample condition Phi(sigma) <= epsilon, found by bisection.

    The upper bracket starts at a closed-form scale and doubles until
    feasible; bracket failure raises InfeasibleError with the last
    Phi value.
    """
    if spec.mode != "joint_pac":
        raise ValueError("spec.mode must be 'joint_pac'")
    if spec.gamma is None:
        raise ValueError("joint_pac calibration needs spec.gamma")
    if m != profile.profile.m:
        raise ValueError(f"m={m} does not match the profile size {profile.profile.m}")

    def phi(sigma: float) -> float:
        return joint_pac_condition(
            sigma, profile.per_slice, profile.delta0, spec.alpha, spec.gamma, m
        )

    lo = _SIGMA_FLOOR
    if phi(lo) <= spec.epsilon:
        return NoiseSpec(sigma2=lo * lo, dim=profile.profile.dim)
    scale = max(profile.delta0, float(np.max(profile.per_slice)), lo)
    hi = scale * math.sqrt(
        spec.alpha * (spec.alpha - 1.0) / (2.0 * max(spec.epsilon, 1e-12))
    )
    hi = max(hi, 2.0 * lo)
    doublings = 0
    while phi(hi) > spec.epsilon:
        doublings += 1
        if doublings > _MAX_DOUBLINGS:
            raise InfeasibleError(
                f"joint calibration bracket failure: Phi({hi:.3e}) = "
                f"{phi(hi):.6g} > epsilon = {spec.epsilon}"
            )
        hi *= 2.0
    while hi - lo > _BISECT_RTOL * hi:
        mid = 0.5 * (lo + hi)
        if phi(mid) <= spec.epsilon:
            hi = mid
        else:
            lo = mid
    return NoiseSpec(sigma2=hi * hi, dim=profile.profile.dim)


def _check_weights(shifts: np.ndarray, weights: np.ndarray):
    if shifts.shape != weights.shape or shifts.ndim != 1:
        raise ValueError("shifts and weights must be matching 1-D vectors")
    if abs(float(weights.sum()) - 1.0) > 1e-9:
        raise ValueError("weights must sum to 1")
    if np.any(weights < 0):
        raise ValueError("weights must be nonnegative")


def ave_srd_gaussian(
    shifts, weights, sigma2: float, alpha: float
) -> float:
    """Exact average sliced divergence between two isotropic Gaussians
    whose means differ by a vector with the given per-slice shifts."""
    shifts = np.asarray(shifts, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    _check_weights(shifts, weights)
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    per = alpha * shifts**2 / (2.0 * sigma2)
    return float(weights @ per)


def joint_srd_gaussian(
    shifts, weights, sigma2: float, alpha: float
) -> float:
    """Exact joint sliced divergence for the same Gaussian pair:
    (1/(alpha-1)) log sum_l w_l exp((alpha-1) alpha shift_l^2 / (2 s2)),
    evaluated with log-sum-exp stabilization."""
    shifts = np.asarray(shifts, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    _check_weights(shifts, weights)
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    per = alpha * shifts**2 / (2.0 * sigma2)
    pos = weights > 0
    return float(logsumexp((alpha - 1.0) * per[pos], b=weights[pos])) / (alpha - 1.0)


def divergence_report(
    shifts, weights, sigma2: float, alpha: float, shift_norm: float | None = None
) -> DivergenceReport:
    """Bundle per-slice, average, joint, and (optionally) unsliced
    divergences for a mean-shifted isotropic Gaussian pair."""
    shifts = np.asarray(shifts, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    per = alpha * shifts**2 / (2.0 * sigma2)
    full = None
    if shift_norm is not None:
        full = renyi_gaussian_shift(shift_norm, sigma2, alpha)
    return DivergenceReport(
        ave=ave_srd_gaussian(shifts, weights, sigma2, alpha),
        joint=joint_srd_gaussian(shifts, weights, sigma2, alpha),
        per_slice=per,
        full=full,
    )


def srpp_to_spp(epsilon_alpha: float, alpha: float, delta: float) -> float:
    """Convert an order-alpha sliced Renyi budget into the approximate
    (epsilon, delta) form: epsilon + log(1/delta) / (alpha - 1)."""
    if epsilon_alpha < 0:
        raise ValueError("epsilon_alpha must be nonnegative")
    if not alpha > 1.0:
        raise ValueError("alpha must be strictly greater than 1")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    return epsilon_alpha + math.log(1.0 / delta) / (alpha - 1.0)


def srpp_to_spp_grid(entries, delta: float) -> float:
    """Minimize the conversion over a grid of (alpha, epsilon_alpha)."""
    values = [srpp_to_spp(eps, alpha, delta) for alpha, eps in entries]
    if not values:
        raise ValueError("entries must be nonempty")
    return min(values)


def group_envelope_baseline(
    delta_group: float, alpha: float, epsilon: float, dim: int = 1
) -> NoiseSpec:
    """Prior-free worst-case baseline: sigma2 = alpha delta_group^2 / (2 eps)."""
    if delta_group < 0:
        raise ValueError("delta_group must be nonnegative")
    if not alpha > 1.0:
        raise ValueError("alpha must be strictly greater than 1")
    if not epsilon > 0.0:
        raise ValueError("epsilon must be positive")
    return NoiseSpec(
        sigma2=alpha * delta_group * delta_group / (2.0 * epsilon), dim=dim
    )


def privatize(query_output, noise: NoiseSpec, seed: int) -> np.ndarray:
    """Add i.i.d. N(0, sigma2) per coordinate from a deterministic stream."""
    x = np.asarray(query_output, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != noise.dim:
        raise ValueError(
            f"dimension mismatch: output has shape {x.shape}, noise dim {noise.dim}"
        )
    if noise.sigma2 == 0.0:
        return x.copy()
    rng = rng_stream(seed, 0x7210)
    return x + rng.normal(0.0, math.sqrt(noise.sigma2), size=noise.dim)
