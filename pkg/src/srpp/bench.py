"""Timing harnesses: sliced sensitivity vs the unsliced oracle, and the
numba kernel vs its pure-Python fallback."""

import time

import numpy as np

from srpp import _kernels
from srpp.ot1d import w_inf_exact_nd
from srpp.rng import rng_stream
from srpp.scenario import ScenarioDataset, SecretSpace, WorldSample, sample_slice_profile
from srpp.sensitivity import build_profile


def time_call(fn, *args, repeat: int = 5) -> float:
    """Best-of-repeat wall time of fn(*args) in seconds."""
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def fit_loglog_slope(ns, ts) -> float:
    """Least-squares slope of log t against log n."""
    return float(np.polyfit(np.log(np.asarray(ns, float)), np.log(ts), 1)[0])


def synthetic_scenario(n: int, d: int, instances: int, seed: int) -> ScenarioDataset:
    """One secret pair replicated across `instances` priors, n x d worlds."""
    rng = rng_stream(seed, 0xBE7C)
    space = SecretSpace(secrets=("a", "b"), pairs=(("a", "b"),))
    worlds = []
    for i in range(instances):
        for s in ("a", "b"):
            worlds.append(
                WorldSample(
                    prior_id=f"p{i:03d}",
                    secret_id=s,
                    samples=rng.standard_normal((n, d)),
                )
            )
    return ScenarioDataset(secret_space=space, worlds=tuple(worlds), dim=d)


def bench_sliced(ns, d: int, m: int, instances: int, seed: int, repeat: int = 3):
    """Wall time of exact sliced sensitivity per sample size."""
    profile = sample_slice_profile(d, m, seed + 1)
    rows = []
    for n in ns:
        data = synthetic_scenario(int(n), d, instances, seed)
        rows.append((int(n), time_call(build_profile, data, profile, repeat=repeat)))
    return rows


def bench_oracle(ns, d: int, seed: int, repeat: int = 3):
    """Wall time of the full-dimensional bottleneck oracle per size."""
    rng = rng_stream(seed, 0xBE7D)
    rows = []
    for n in ns:
        X = rng.standard_normal((int(n), d))
        Y = rng.standard_normal((int(n), d))
        w_inf_exact_nd(X, Y)  # warm the JIT before timing
        rows.append((int(n), time_call(w_inf_exact_nd, X, Y, repeat=repeat)))
    return rows


def bench_backends(ns, d: int, seed: int, repeat: int = 3):
    """Compare the active matching kernel with the pure-Python fallback."""
    rng = rng_stream(seed, 0xBE7E)
    rows = []
    for n in ns:
        X = rng.standard_normal((int(n), d))
        Y = rng.standard_normal((int(n), d))
        diff = X[:, None, :] - Y[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        t_mid = float(np.median(dist))
        impls = [("numpy", _kernels._feasible_impl)]
        if _kernels.backend() == "numba":
            _kernels.bottleneck_feasible(dist, t_mid)  # compile before timing
            impls.append(("numba", _kernels.bottleneck_feasible))
        for name, fn in impls:
            rows.append((name, int(n), time_call(fn, dist, t_mid, repeat=repeat)))
    return rows
