"""Discrepancy-cap estimation for the SGD accountants.

A cap bounds how many records of a coupled dataset pair differ inside a
minibatch draw: ``tail_cap`` is a high-probability bound on the count,
``ms_cap`` an upper bound on its second moment.  Estimators: Monte
Carlo over a caller-supplied coupling sampler (Hoeffding and DKW
corrected), closed forms from a total-variation mismatch rate, the
hypergeometric model for fixed-size sampling without replacement, and
deterministic localized-influence caps.  Union-bound bookkeeping
recombines per-instance estimates.
"""

import math
from dataclasses import dataclass

import numpy as np

from srpp.rng import rng_stream

SCHEMES = ("WR", "WOR", "Poisson")


@dataclass(frozen=True)
class SubsamplingSpec:
    """Minibatch scheme: WR/WOR with fixed batch, or Poisson with rate."""

    scheme: str
    population: int
    batch: int = 0
    rate: float = 0.0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.population < 1:
            raise ValueError("population must be a positive integer")
        if self.scheme == "WR":
            if self.batch < 1:
                raise ValueError("WR needs batch >= 1")
        elif self.scheme == "WOR":
            if not 1 <= self.batch <= self.population:
                raise ValueError("WOR needs 1 <= batch <= population")
        else:
            if not 0.0 < self.rate <= 1.0:
                raise ValueError("Poisson needs rate in (0, 1]")

    @property
    def batch_bound(self) -> int:
        """Largest possible batch size (population for Poisson)."""
        return self.population if self.scheme == "Poisson" else self.batch


@dataclass(frozen=True)
class CapEstimate:
    """Tail and mean-square discrepancy caps with their budgets.

    For ``monte_carlo`` estimates the raw sorted draws and empirical
    second moment are retained so union-bound recombination can
    recompute the corrections at a tighter failure split.
    """

    tail_cap: float
    delta: float
    ms_cap: float
    gamma: float
    batch: int
    method: str
    mu2: float | None = None
    draws: np.ndarray | None = None

    def __post_init__(self):
        if not 0.0 <= self.tail_cap <= self.batch:
            raise ValueError("tail_cap must lie in [0, batch]")
        if not 0.0 <= self.ms_cap <= self.batch**2:
            raise ValueError("ms_cap must lie in [0, batch^2]")
        if self.draws is not None:
            object.__setattr__(
                self, "draws", np.sort(np.asarray(self.draws, dtype=np.float64))
            )


def subsample_with(sub: SubsamplingSpec, rng: np.random.Generator) -> np.ndarray:
    """Draw one index multiset from an existing generator."""
    n = sub.population
    if sub.scheme == "WR":
        return rng.integers(0, n, size=sub.batch)
    if sub.scheme == "WOR":
        return rng.choice(n, size=sub.batch, replace=False)
    while True:
        mask = rng.random(n) < sub.rate
        if mask.any():
            return np.flatnonzero(mask)


def subsample(sub: SubsamplingSpec, seed: int) -> np.ndarray:
    """Draw one index multiset deterministically from a seed.

    WR returns a length-B sequence with multiplicity, WOR a uniform
    B-subset, Poisson an independent-inclusion set resampled until
    nonempty.
    """
    return subsample_with(sub, rng_stream(seed, 0x5AB5))


def discrepancy_count(x, x_prime, indices) -> int:
    """Number of drawn indices (with multiplicity) where the records differ."""
    x = np.asarray(x)
    x_prime = np.asarray(x_prime)
    if x.shape != x_prime.shape:
        raise ValueError(f"dataset shapes differ: {x.shape} vs {x_prime.shape}")
    indices = np.asarray(indices, dtype=np.int64)
    n = x.shape[0]
    if indices.size and (indices.min() < 0 or indices.max() >= n):
        raise ValueError("subsampled index out of range")
    differs = x != x_prime
    if differs.ndim > 1:
        differs = differs.reshape(n, -1).any(axis=1)
    return int(differs[indices].sum())


def caps_from_draws(
    draws, batch: int, delta_t: float, gamma_t: float, method: str = "monte_carlo"
) -> CapEstimate:
    """Cap estimates from raw Monte-Carlo discrepancy draws.

    ms_cap is the empirical second moment plus the Hoeffding correction
    B^2 sqrt(log(2/gamma)/(2M)), clamped at the trivial bound B^2.
    tail_cap is the empirical (1 - (delta - e))-quantile (the
    ceil-indexed order statistic) when delta exceeds the DKW band e,
    and falls back to B otherwise.
    """
    draws = np.sort(np.asarray(draws, dtype=np.float64))
    m = draws.size
    if m < 2:
        raise ValueError("need at least 2 Monte-Carlo draws")
    if not 0.0 < delta_t < 1.0:
        raise ValueError("delta_t must lie in (0, 1)")
    if not 0.0 < gamma_t < 1.0:
        raise ValueError("gamma_t must lie in (0, 1)")
    if draws[0] < 0 or draws[-1] > batch:
        raise ValueError("draws must lie in [0, batch]")
    band = math.sqrt(math.log(2.0 / gamma_t) / (2.0 * m))
    mu2 = float(np.mean(draws**2))
    ms_cap = min(mu2 + batch * batch * band, float(batch * batch))
    if delta_t > band:
        k = math.ceil((1.0 - (delta_t - band)) * m)
        tail_cap = float(draws[min(max(k, 1), m) - 1])
    else:
        tail_cap = float(batch)
    return CapEstimate(
        tail_cap=tail_cap,
        delta=delta_t,
        ms_cap=ms_cap,
        gamma=gamma_t,
        batch=batch,
        method=method,
        mu2=mu2,
        draws=draws,
    )


def mc_caps(
    paired_sampler,
    sub: SubsamplingSpec,
    M: int,
    delta_t: float,
    gamma_t: float,
    seed: int,
) -> CapEstimate:
    """Monte-Carlo cap estimation for one (prior, pair) instance.

    ``paired_sampler(rng)`` must return one coupled dataset pair with
    the scenario's coupling semantics.  Replicate m draws its pair and
    its minibatch from the stream (seed, m), so replicates are
    independent and the whole estimate is reproducible.
    """
    if M < 2:
        raise ValueError("need at least 2 Monte-Carlo replicates")
    draws = np.empty(M)
    for m in range(M):
        rng = rng_stream(seed, m)
        x, x_prime = paired_sampler(rng)
        idx = subsample_with(sub, rng)
        draws[m] = discrepancy_count(x, x_prime, idx)
    return caps_from_draws(draws, sub.batch_bound, delta_t, gamma_t)


def caps_from_tv(tau: float, B: int, delta_t: float, scheme: str = "WR") -> CapEstimate:
    """Closed-form caps from a recordwise total-variation mismatch rate.

    Under recordwise maximal coupling the per-draw mismatch is
    Bernoulli(tau), so with replacement the discrepancy is
    Binomial(B, tau): ms_cap = B tau (1 - tau) + (B tau)^2 exactly, and
    tail_cap = B tau + sqrt((B/2) log(1/delta)) clamped into [0, B].
    Both remain conservative for sampling without replacement.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    if B < 1:
        raise ValueError("B must be a positive integer")
    if not 0.0 < delta_t <= 1.0:
        raise ValueError("delta_t must lie in (0, 1]")
    if scheme not in ("WR", "WOR"):
        raise ValueError("caps_from_tv supports WR and WOR schemes")
    ms_cap = B * tau * (1.0 - tau) + (B * tau) ** 2
    tail = B * tau + math.sqrt((B / 2.0) * math.log(1.0 / delta_t))
    return CapEstimate(
        tail_cap=min(max(tail, 0.0), float(B)),
        delta=delta_t,
        ms_cap=min(ms_cap, float(B * B)),
        gamma=0.0,
        batch=B,
        method="binomial_tv",
    )


def hypergeometric_k2(population: int, differing: int, batch: int):
    """Moments of the discrepancy under fixed-size WOR sampling when the
    worlds differ in exactly ``differing`` records.

    Returns (mean, variance, second_moment) of
    Hypergeometric(population, differing, batch).
    """
    n, d, b = population, differing, batch
    if not 0 <= d <= n:
        raise ValueError("need 0 <= differing <= population")
    if not 1 <= b <= n:
        raise ValueError("need 1 <= batch <= population")
    frac = d / n
    mean = (b * d) / n
    if n == 1:
        variance = 0.0
    else:
        variance = mean * (1.0 - frac) * (n - b) / (n - 1)
    return mean, variance, variance + mean * mean


def localized_cap(d_max: int, B: int) -> CapEstimate:
    """Deterministic caps when the secret touches at most d_max records."""
    if d_max < 0:
        raise ValueError("d_max must be nonnegative")
    if B < 1:
        raise ValueError("B must be a positive integer")
    return CapEstimate(
        tail_cap=float(min(B, d_max)),
        delta=0.0,
        ms_cap=float(min(B * B, d_max * d_max)),
        gamma=0.0,
        batch=B,
        method="localized",
    )


def union_caps(per_instance, gamma_total: float, delta_t: float) -> CapEstimate:
    """Uniform caps over several instances at total failure gamma_total.

    Each instance's Monte-Carlo corrections are recomputed at the split
    gamma_total / N, then the coordinatewise maximum of the tail and
    mean-square caps is returned.
    """
    estimates = list(per_instance)
    if not estimates:
        raise ValueError("per_instance must be nonempty")
    if not 0.0 < gamma_total < 1.0:
        raise ValueError("gamma_total must lie in (0, 1)")
    n_inst = len(estimates)
    batch = estimates[0].batch
    m = None
    for est in estimates:
        if est.draws is None:
            raise ValueError("union_caps needs Monte-Carlo estimates with raw draws")
        if est.batch != batch:
            raise ValueError("all estimates must share the batch size")
        if m is None:
            m = est.draws.size
        elif est.draws.size != m:
            raise ValueError("all estimates must share the Monte-Carlo size")
    recomputed = [
        caps_from_draws(est.draws, batch, delta_t, gamma_total / n_inst)
        for est in estimates
    ]
    return CapEstimate(
        tail_cap=max(r.tail_cap for r in recomputed),
        delta=delta_t,
        ms_cap=max(r.ms_cap for r in recomputed),
        gamma=gamma_total,
        batch=batch,
        method="union",
    )


def delta_gamma_bookkeeping(deltas, gammas) -> float:
    """Residual success probability 1 - sum(deltas) - sum(gammas) of the
    across-round union bound over tail and calibration failures."""
    return 1.0 - float(np.sum(deltas)) - float(np.sum(gammas))


def independent_coupling(draw_a, draw_b):
    """Coupling sampler drawing the two worlds independently."""

    def sampler(rng: np.random.Generator):
        return draw_a(rng), draw_b(rng)

    return sampler


def two_world_coupling(x0, x1):
    """Shared-latent coupling for a fixed two-world pair (label flip):
    both worlds are deterministic, only subsampling is random."""
    x0 = np.asarray(x0)
    x1 = np.asarray(x1)
    if x0.shape != x1.shape:
        raise ValueError("the two worlds must have identical shapes")

    def sampler(rng: np.random.Generator):
        return x0, x1

    return sampler


def bernoulli_mismatch_coupling(draw_dataset, tau: float, perturb):
    """Recordwise maximal coupling for i.i.d. record models.

    Draws a base dataset, flips an independent Bernoulli(tau) mismatch
    indicator per record, and perturbs the flagged records via
    ``perturb(rng, rows)`` to produce the coupled partner.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")

    def sampler(rng: np.random.Generator):
        x = np.asarray(draw_dataset(rng))
        mask = rng.random(x.shape[0]) < tau
        x_prime = np.array(x, copy=True)
        if mask.any():
            x_prime[mask] = perturb(rng, x[mask])
        return x, x_prime

    return sampler
