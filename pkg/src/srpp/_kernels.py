"""Hot inner-loop kernels with optional numba JIT.

The bipartite bottleneck feasibility check is the one genuinely
loop-bound kernel in the package; everything else is vectorized numpy.
By default the kernel is compiled with numba.  Setting the environment
variable ``SRPP_NUMBA=0`` (or running without numba installed) selects
the pure-Python/numpy fallback, which computes identical results.
``srpp bench --suite backends`` compares the two paths.
"""

import os

import numpy as np


def _feasible_impl(dist, t):
    # Kuhn's augmenting-path matching on the threshold graph
    # {(i, j): dist[i, j] <= t}, iterative so it compiles under numba.
    # Deterministic vertex order: left vertices and right candidates are
    # scanned in increasing index order.
    n = dist.shape[0]
    match_r = np.full(n, -1, np.int64)
    stack_u = np.empty(n + 1, np.int64)
    stack_vi = np.empty(n + 1, np.int64)
    entered_via = np.empty(n + 1, np.int64)
    used = np.empty(n, np.bool_)
    for start in range(n):
        used[:] = False
        top = 0
        stack_u[0] = start
        stack_vi[0] = 0
        entered_via[0] = -1
        augmented = False
        while top >= 0:
            u = stack_u[top]
            vi = stack_vi[top]
            pushed = False
            while vi < n:
                if not used[vi] and dist[u, vi] <= t:
                    used[vi] = True
                    w = match_r[vi]
                    if w == -1:
                        match_r[vi] = u
                        for k in range(top - 1, -1, -1):
                            match_r[entered_via[k + 1]] = stack_u[k]
                        augmented = True
                        break
                    stack_vi[top] = vi
                    top += 1
                    stack_u[top] = w
                    stack_vi[top] = 0
                    entered_via[top] = vi
                    pushed = True
                    break
                vi += 1
            if augmented:
                break
            if pushed:
                continue
            top -= 1
            if top >= 0:
                stack_vi[top] += 1
        if not augmented:
            return False
    return True


_USE_NUMBA = os.environ.get("SRPP_NUMBA", "1") != "0"

if _USE_NUMBA:
    try:
        from numba import njit

        bottleneck_feasible = njit(cache=True)(_feasible_impl)
    except ImportError:
        _USE_NUMBA = False

if not _USE_NUMBA:
    bottleneck_feasible = _feasible_impl


def backend() -> str:
    """Name of the active kernel backend ("numba" or "numpy")."""
    return "numba" if _USE_NUMBA else "numpy"
