"""Partition tuning for contention-resolution trees.

Given a scenario generating function f, the success probability of a
depth-k tree with partition z is rho = sum_i (z_i - z_{i-1}) f'(z_{i-1}),
a Riemann lower sum of f' over [0, 1].  This module maximizes that sum:

* quantile_partition  - fast heuristic placing breakpoints at quantiles
  of sqrt(f''), asymptotically optimal as k grows;
* dp_optimal_partition / rho_by_pieces - exact maximization over all
  partitions with breakpoints on a uniform grid {0, 1/M, ..., 1};
* closed-form asymptotics and a lower bound on the collision rate 1-rho.

All optimizers require f' nondecreasing and convex on [0, 1], which every
station-count generating function satisfies (nonnegative coefficients).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .distributions import Polynomial
from .tree import Partition, ProbabilityTree

__all__ = [
    "DEFAULT_GRID_SIZE",
    "DegeneratePartitionError",
    "RootNotFoundError",
    "success_probability",
    "quantile_partition",
    "dp_optimal_partition",
    "rho_by_pieces",
    "single_step_optimum",
    "sqrt_curvature_integral",
    "asymptotic_collision",
    "lower_bound_collision",
    "lower_bound_details",
    "TuningReport",
    "tune",
]

DEFAULT_GRID_SIZE = 65536

_NEG_TOL = 1e-12


class DegeneratePartitionError(ValueError):
    """The requested partition collapses (duplicate breakpoints)."""


class RootNotFoundError(ValueError):
    """No root of the optimality equation exists in (0, 1)."""


def success_probability(f: Polynomial, partition: Partition) -> float:
    """Riemann lower sum of f' over the partition: the tree's success rate."""
    z = partition.points
    f1 = f.derivative()
    return float(np.dot(np.diff(z), f1(z[:-1])))


def _check_curvature(values: np.ndarray, what: str) -> np.ndarray:
    scale = max(1.0, float(np.max(np.abs(values))))
    if np.any(values < -_NEG_TOL * scale):
        raise ValueError(f"{what} must be nonnegative on [0, 1]")
    return np.maximum(values, 0.0)


def quantile_partition(f: Polynomial, k: int, grid_size: int = DEFAULT_GRID_SIZE) -> Partition:
    """Breakpoints at the m-quantiles of sqrt(f'') for m = 2^k pieces.

    The density sqrt(f'') is tabulated at panel midpoints on a uniform
    grid of grid_size panels; z_j is the smallest grid point where the
    cumulative mass reaches fraction j/m.  The grid must comfortably
    resolve the partition, so grid_size >= 64 * 2^k is enforced.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    m = 1 << k
    if grid_size < 64 * m:
        raise ValueError(f"grid_size must be >= {64 * m} for k = {k}")
    M = int(grid_size)
    f2 = f.derivative(2)
    mid = (np.arange(M) + 0.5) / M
    h = np.sqrt(_check_curvature(f2(mid), "f''"))
    H = np.concatenate([[0.0], np.cumsum(h)])
    if H[-1] <= 0.0:
        raise DegeneratePartitionError("f'' vanishes on [0, 1]; no mass to split")
    targets = (np.arange(1, m) / m) * H[-1]
    idx = np.searchsorted(H, targets, side="left")
    z = np.concatenate([[0.0], idx / M, [1.0]])
    if not np.all(np.diff(z) > 0.0):
        raise DegeneratePartitionError(
            f"quantiles collide on the grid (grid_size {M} too coarse for this f)"
        )
    return Partition(z)


# DP over breakpoints a/M.  value[j][a] = best lower-sum mass obtainable on
# [a/M, 1] using exactly j pieces; value[j][a] = max_{b>a} (b - a) c_a +
# value[j-1][b] with c_a = f'(a/M) / M.  Rewriting as max_b (b c_a +
# value[j-1][b]) - a c_a makes each level a max over lines y = b x + q_b
# queried at x = c_a: a convex-hull trick.  Slopes b arrive in decreasing
# order as a descends and queries x = c_a are nonincreasing, so one pass
# with two monotone pointers gives O(M) per level.


@njit(cache=True)
def _dp_values(c, m):
    M = c.shape[0] - 1
    prev = np.full(M + 1, -1e300)
    cur = np.full(M + 1, -1e300)
    out = np.empty(m)
    for a in range(M):
        prev[a] = (M - a) * c[a]
    out[0] = prev[0]
    hull_s = np.empty(M + 2, np.int64)
    hull_q = np.empty(M + 2)
    for j in range(2, m + 1):
        t = -1
        p = 0
        amax = M - j
        for a in range(amax, -1, -1):
            b = a + 1
            qb = prev[b]
            while t >= 1:
                # drop hull top while the new line covers it at its own range
                if (hull_s[t - 1] - hull_s[t]) * (qb - hull_q[t - 1]) >= (
                    hull_q[t] - hull_q[t - 1]
                ) * (hull_s[t - 1] - b):
                    t -= 1
                else:
                    break
            t += 1
            hull_s[t] = b
            hull_q[t] = qb
            if p > t:
                p = t
            x = c[a]
            while p < t and hull_s[p + 1] * x + hull_q[p + 1] >= hull_s[p] * x + hull_q[p]:
                p += 1
            cur[a] = hull_s[p] * x + hull_q[p] - a * x
        for i in range(M + 1):
            prev[i] = cur[i]
            cur[i] = -1e300
        out[j - 1] = prev[0]
    return out


@njit(cache=True)
def _dp_partition_kernel(c, m):
    M = c.shape[0] - 1
    prev = np.full(M + 1, -1e300)
    cur = np.full(M + 1, -1e300)
    choice = np.empty((m + 1, M + 1), np.int32)
    for a in range(M):
        prev[a] = (M - a) * c[a]
        choice[1, a] = M
    hull_s = np.empty(M + 2, np.int64)
    hull_q = np.empty(M + 2)
    for j in range(2, m + 1):
        t = -1
        p = 0
        amax = M - j
        for a in range(amax, -1, -1):
            b = a + 1
            qb = prev[b]
            while t >= 1:
                if (hull_s[t - 1] - hull_s[t]) * (qb - hull_q[t - 1]) >= (
                    hull_q[t] - hull_q[t - 1]
                ) * (hull_s[t - 1] - b):
                    t -= 1
                else:
                    break
            t += 1
            hull_s[t] = b
            hull_q[t] = qb
            if p > t:
                p = t
            x = c[a]
            while p < t and hull_s[p + 1] * x + hull_q[p + 1] >= hull_s[p] * x + hull_q[p]:
                p += 1
            cur[a] = hull_s[p] * x + hull_q[p] - a * x
            choice[j, a] = hull_s[p]
        for i in range(M + 1):
            prev[i] = cur[i]
            cur[i] = -1e300
    breaks = np.empty(m + 1, np.int64)
    breaks[0] = 0
    a = 0
    for j in range(m, 0, -1):
        a = choice[j, a]
        breaks[m - j + 1] = a
    return prev[0], breaks


def _dp_cost_vector(f: Polynomial, grid_size: int) -> np.ndarray:
    M = int(grid_size)
    grid = np.arange(M + 1) / M
    c = _check_curvature(f.derivative()(grid), "f'") / M
    if np.any(np.diff(c) < -_NEG_TOL):
        raise ValueError("f' must be nondecreasing on [0, 1]")
    return np.maximum.accumulate(c)  # scrub rounding dips; exact for gf inputs


def rho_by_pieces(f: Polynomial, max_pieces: int, grid_size: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    """Optimal rho for every piece count m = 1..max_pieces on one grid.

    Value-only DP sweep; O(max_pieces * grid_size) time, O(grid_size)
    memory, so suitable for large sweeps where dp_optimal_partition's
    breakpoint tracking would not fit.
    """
    if not 1 <= max_pieces <= grid_size:
        raise ValueError("need 1 <= max_pieces <= grid_size")
    c = _dp_cost_vector(f, grid_size)
    return _dp_values(c, int(max_pieces))


def dp_optimal_partition(f: Polynomial, m: int, grid_size: int = DEFAULT_GRID_SIZE) -> Partition:
    """Exact optimizer: the best m-piece partition on the uniform grid.

    Memory scales as m * grid_size int32 for breakpoint recovery (about
    270 MB at m = 1024, grid_size = 65536); use rho_by_pieces when only
    the optimal value is needed.
    """
    if not 1 <= m <= grid_size:
        raise ValueError("need 1 <= m <= grid_size")
    c = _dp_cost_vector(f, grid_size)
    _, breaks = _dp_partition_kernel(c, int(m))
    return Partition(breaks / grid_size)


def single_step_optimum(f: Polynomial) -> float:
    """Best single breakpoint: the root of (1 - z) f''(z) = f'(z) in (0, 1).

    For a two-piece partition (0, z, 1) the optimal z satisfies this
    first-order condition.  Raises RootNotFoundError when the equation
    has no interior sign change (e.g. f = x, where f'' is 0).
    """
    f1 = f.derivative()
    f2 = f.derivative(2)
    f3 = f.derivative(3)
    grid = np.linspace(0.0, 1.0, 4097)
    if np.any(f3(grid) < -_NEG_TOL):
        warnings.warn("f' is not convex on [0, 1]; root may not be unique")
    vals = (1.0 - grid) * f2(grid) - f1(grid)
    idx = np.flatnonzero((vals[:-1] > 0.0) & (vals[1:] <= 0.0))
    if idx.size == 0:
        raise RootNotFoundError("(1 - z) f''(z) = f'(z) has no root in (0, 1)")
    lo, hi = grid[idx[0]], grid[idx[0] + 1]
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if (1.0 - mid) * f2(mid) - f1(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sqrt_curvature_integral(f: Polynomial, panels: int = 100_000) -> float:
    """Midpoint-rule integral of sqrt(f'') over [0, 1]."""
    if panels < 1:
        raise ValueError("panels must be >= 1")
    f2 = f.derivative(2)
    mid = (np.arange(panels) + 0.5) / panels
    vals = np.sqrt(_check_curvature(f2(mid), "f''"))
    return float(vals.mean())


def asymptotic_collision(f: Polynomial, k: int) -> float:
    """Large-k collision rate of the optimally tuned depth-k tree:
    (integral of sqrt(f''))^2 / 2^(k+1)."""
    if k < 0:
        raise ValueError("k must be >= 0")
    integral = sqrt_curvature_integral(f)
    return integral * integral / float(2 ** (k + 1))


def lower_bound_details(f: Polynomial, m: int) -> dict:
    """Closed-form lower bound on 1 - rho for any m-piece partition.

    leading_term (integral sqrt f'')^2 / (2m) minus a correction
    C * m^(-3/2).  Two candidate constants are reported, differing in
    whether f''' is taken at 1 or at 0; the bound uses the f'''(1)
    variant.  Requires f''(0) > 0.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    f2_at_0 = f.derivative(2)(0.0)
    if f2_at_0 <= 0.0:
        raise ValueError("lower bound requires f''(0) > 0")
    integral = sqrt_curvature_integral(f)
    leading = integral * integral / (2.0 * m)
    denom = 3.0 * math.sqrt(2.0) * f2_at_0**1.5
    c_at_1 = f.derivative(3)(1.0) / denom
    c_at_0 = f.derivative(3)(0.0) / denom
    bound = max(0.0, leading - c_at_1 * m**-1.5)
    return {
        "m": int(m),
        "leading_term": leading,
        "correction_constant": c_at_1,
        "correction_constant_origin_variant": c_at_0,
        "bound": bound,
    }


def lower_bound_collision(f: Polynomial, m: int) -> float:
    return lower_bound_details(f, m)["bound"]


@dataclass(frozen=True)
class TuningReport:
    """Everything a tuning run produced, ready for serialization."""

    method: str
    k: int
    grid_size: int
    partition: Partition
    tree: ProbabilityTree
    rho: float
    asymptotic_bound: float

    @property
    def collision_rate(self) -> float:
        return 1.0 - self.rho

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "k": self.k,
            "grid_size": self.grid_size,
            "rho": self.rho,
            "collision_rate": self.collision_rate,
            "asymptotic_bound": self.asymptotic_bound,
            "partition": self.partition.to_json_dict(),
            "tree": self.tree.to_json_dict(),
        }


def tune(
    f: Polynomial,
    k: int,
    method: str = "quantile",
    grid_size: int = DEFAULT_GRID_SIZE,
) -> TuningReport:
    """Tune a depth-k tree for scenario f and package the result."""
    if k < 1:
        raise ValueError("k must be >= 1")
    m = 1 << k
    if method == "quantile":
        partition = quantile_partition(f, k, grid_size)
    elif method == "dp":
        partition = dp_optimal_partition(f, m, grid_size)
    elif method == "uniform":
        partition = Partition(np.arange(m + 1) / m)
    else:
        raise ValueError(f"unknown method {method!r}")
    return TuningReport(
        method=method,
        k=k,
        grid_size=int(grid_size),
        partition=partition,
        tree=partition.to_tree(),
        rho=success_probability(f, partition),
        asymptotic_bound=asymptotic_collision(f, k),
    )
