"""Per-slice infinity-Wasserstein sensitivities over an instantiated
Pufferfish family, with profile aggregates and Monte-Carlo confidence
terms.

The per-slice sensitivity of a direction is the maximum, over all
(prior, pair) instances, of the 1-D distance between the projected
conditional samples of the two worlds: exact order-statistic gaps in
``exact`` mode, DKW-widened upper bounds in ``dkw`` mode.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from srpp.errors import CapacityError, InfeasibleError
from srpp.ot1d import Sorted1DSample, w_inf_1d_dkw, w_inf_1d_exact, w_inf_exact_nd
from srpp.scenario import ScenarioDataset, SliceProfile, project

_MODES = ("exact", "dkw")
_ORACLE_CAPACITY = 64


@dataclass(frozen=True)
class SensitivityProfile:
    """Per-direction sensitivities plus their profile aggregates.

    ``mean_square`` is the omega-weighted second moment of the
    per-slice values and ``worst`` the largest square; ``delta0`` is a
    caller-supplied almost-sure bound (0 means unknown).
    """

    profile: SliceProfile
    per_slice: np.ndarray
    mode: str
    rho: float | None
    delta0: float
    mean_square: float = field(init=False)
    worst: float = field(init=False)

    def __post_init__(self):
        per_slice = np.asarray(self.per_slice, dtype=np.float64)
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}")
        if per_slice.shape != (self.profile.m,):
            raise ValueError("per_slice length must match the profile")
        if np.any(per_slice < 0) or not np.all(np.isfinite(per_slice)):
            raise ValueError("per_slice entries must be finite and nonnegative")
        if self.delta0 < 0:
            raise ValueError("delta0 must be nonnegative")
        if self.delta0 > 0 and np.any(per_slice > self.delta0 * (1 + 1e-12)):
            raise ValueError("per_slice entries exceed the stated delta0 bound")
        object.__setattr__(self, "per_slice", per_slice)
        sq = per_slice**2
        object.__setattr__(self, "mean_square", float(self.profile.weights @ sq))
        object.__setattr__(self, "worst", float(sq.max()))


def _instance_pairs(data: ScenarioDataset):
    for prior, (si, sj) in data.instances():
        yield prior, (si, sj), data.world(prior, si), data.world(prior, sj)


def _annotate(exc, prior, pair):
    return type(exc)(f"prior {prior!r}, pair {pair!r}: {exc}")


def per_slice_sensitivity(
    data: ScenarioDataset,
    direction: np.ndarray,
    mode: str = "exact",
    rho: float | None = None,
) -> float:
    """Worst-case 1-D distance along one direction over all instances."""
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}")
    if mode == "dkw" and (rho is None or not 0.0 < rho < 1.0):
        raise ValueError("dkw mode needs rho in (0, 1)")
    best = 0.0
    for prior, pair, wa, wb in _instance_pairs(data):
        try:
            a = Sorted1DSample.from_values(project(wa.samples, direction))
            b = Sorted1DSample.from_values(project(wb.samples, direction))
            if mode == "exact":
                val = w_inf_1d_exact(a, b)
            else:
                val = w_inf_1d_dkw(a, b, rho)
        except (ValueError, InfeasibleError) as exc:
            raise _annotate(exc, prior, pair) from exc
        best = max(best, val)
    return best


def _exact_batch(data: ScenarioDataset, directions: np.ndarray) -> np.ndarray:
    # Vectorized exact mode: project whole worlds onto all directions at
    # once and take per-direction max order-statistic gaps.  Projections
    # are laid out one direction per contiguous row so the sorts stay
    # cache-friendly at large n.
    per = np.zeros(directions.shape[0])
    for prior, pair, wa, wb in _instance_pairs(data):
        if wa.n != wb.n:
            exc = ValueError(f"sample sizes differ: {wa.n} vs {wb.n}")
            raise _annotate(exc, prior, pair)
        pa = np.sort(directions @ wa.samples.T, axis=1)
        pb = np.sort(directions @ wb.samples.T, axis=1)
        per = np.maximum(per, np.max(np.abs(pa - pb), axis=1))
    return per


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("SRPP_THREADS", "1")))
    except ValueError:
        return 1


def build_profile(
    data: ScenarioDataset,
    profile: SliceProfile,
    mode: str = "exact",
    rho: float | None = None,
    delta0: float = 0.0,
    gamma: float | None = None,
    joint_union: bool = False,
) -> SensitivityProfile:
    """Per-slice sensitivities for every profile direction plus aggregates.

    With ``joint_union=True`` the caller supplies a global failure
    budget ``gamma`` and each DKW estimate runs at the union-bound split
    rho = (gamma/2) / (instances * directions), so all per-slice bounds
    hold jointly with probability at least 1 - gamma/2.

    ``delta0`` is the caller's almost-sure bound on the per-slice
    sensitivity.  In dkw mode estimates are clipped to it (min of two
    valid upper bounds); in exact mode an empirical value above it
    refutes the bound and raises.
    """
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}")
    if data.dim != profile.dim:
        raise ValueError(
            f"scenario dimension {data.dim} != profile dimension {profile.dim}"
        )
    if delta0 < 0:
        raise ValueError("delta0 must be nonnegative")
    if joint_union:
        if mode != "dkw":
            raise ValueError("joint_union applies to dkw mode only")
        if gamma is None or not 0.0 < gamma < 1.0:
            raise ValueError("joint_union needs gamma in (0, 1)")
        rho = (gamma / 2.0) / (data.instance_count * profile.m)

    if mode == "exact":
        per = _exact_batch(data, profile.directions)
        if delta0 > 0 and np.any(per > delta0):
            bad = int(np.argmax(per))
            raise ValueError(
                f"direction {bad}: empirical sensitivity {per[bad]:.6g} exceeds "
                f"delta0={delta0:.6g}; the supplied bound is not valid for this data"
            )
    else:
        if rho is None or not 0.0 < rho < 1.0:
            raise ValueError("dkw mode needs rho in (0, 1)")

        def one(i: int) -> float:
            return per_slice_sensitivity(data, profile.directions[i], "dkw", rho)

        workers = _threads()
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                per = np.fromiter(
                    pool.map(one, range(profile.m)), dtype=np.float64, count=profile.m
                )
        else:
            per = np.fromiter(
                (one(i) for i in range(profile.m)), dtype=np.float64, count=profile.m
            )
        if delta0 > 0:
            per = np.minimum(per, delta0)

    return SensitivityProfile(
        profile=profile, per_slice=per, mode=mode, rho=rho, delta0=float(delta0)
    )


def ave_ucb(profile: SensitivityProfile, gamma: float, m: int) -> float:
    """Upper confidence bound on the mean-square sensitivity over a
    Monte-Carlo direction profile.

    Returns (1/m) sum per_slice^2 + delta0^2 sqrt(log(4/gamma) / (2m)),
    valid with probability 1 - gamma when the per-slice values hold
    jointly with probability 1 - gamma/2 and directions are i.i.d.
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    if m != profile.profile.m:
        raise ValueError(f"m={m} does not match the profile size {profile.profile.m}")
    if profile.delta0 <= 0:
        raise ValueError("ave_ucb needs a positive delta0 bound on the profile")
    hoeffding = profile.delta0**2 * math.sqrt(math.log(4.0 / gamma) / (2.0 * m))
    return float(np.mean(profile.per_slice**2) + hoeffding)


def full_sensitivity_oracle(data: ScenarioDataset) -> float:
    """Max over instances of the full-dimensional bottleneck distance.

    Oracle-grade reference for the unsliced Wasserstein sensitivity;
    refuses worlds with more than 64 samples.
    """
    best = 0.0
    for prior, pair, wa, wb in _instance_pairs(data):
        if wa.n != wb.n:
            exc = ValueError(f"sample sizes differ: {wa.n} vs {wb.n}")
            raise _annotate(exc, prior, pair)
        if wa.n > _ORACLE_CAPACITY:
            exc = CapacityError(
                f"n={wa.n} exceeds the full oracle capacity {_ORACLE_CAPACITY}"
            )
            raise _annotate(exc, prior, pair)
        try:
            val = w_inf_exact_nd(wa.samples, wb.samples)
        except (ValueError, CapacityError) as exc:
            raise _annotate(exc, prior, pair) from exc
        best = max(best, val)
    return best
