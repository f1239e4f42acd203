"""Exact small-instance optima and power-control feasibility.

Power-control feasibility rests on the Perron root r(A) of the normalized
gain matrix: the best SIR any power assignment can reach is 1 / (r(A) - 1).
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .core import GainTable

MAX_UNIFORM_N = 22
MAX_PC_N = 18


class SizeGuardError(ValueError):
    """Instance too large for exhaustive search."""


class ConvergenceError(RuntimeError):
    def __init__(self, msg: str, last_iterate: np.ndarray, bracket: tuple[float, float]):
        super().__init__(msg)
        self.last_iterate = last_iterate
        self.bracket = bracket


def normalized_gain_matrix(gains: GainTable, links: Sequence[int] | None = None) -> np.ndarray:
    """``a[i, j] = I_ij / S_j`` off the diagonal, ones on it."""
    g = gains if links is None else gains.restrict(links)
    a = g.interference / g.signal[None, :]
    np.fill_diagonal(a, 1.0)
    return a


def strong_components(a: np.ndarray) -> list[np.ndarray]:
    """Strongly connected components of the nonzero pattern of ``a``."""
    n = a.shape[0]
    reach = (a > 0) | np.eye(n, dtype=bool)
    # transitive closure by repeated squaring
    for _ in range(max(1, math.ceil(math.log2(max(n, 2))))):
        nxt = (reach.astype(np.int64) @ reach.astype(np.int64)) > 0
        if np.array_equal(nxt, reach):
            break
        reach = nxt
    mutual = reach & reach.T
    seen = np.zeros(n, dtype=bool)
    comps = []
    for i in range(n):
        if not seen[i]:
            members = np.nonzero(mutual[i])[0]
            seen[members] = True
            comps.append(members)
    return comps


def _irreducible_bracket(a: np.ndarray, tol: float, max_iter: int,
                         stop_below: float | None, stop_above: float | None) -> tuple[float, float]:
    """Collatz-Wielandt bracket on r(a) for an irreducible ``a``.

    Iterates on a + I, which is primitive, so the iterate stays strictly
    positive and the bracket closes geometrically even for periodic ``a``.
    """
    n = a.shape[0]
    if n == 1:
        return float(a[0, 0]), float(a[0, 0])
    x = np.ones(n)
    lo, hi = 0.0, math.inf
    for _ in range(max_iter):
        ax = a @ x
        ratio = ax / x
        lo, hi = float(ratio.min()), float(ratio.max())
        if hi - lo <= tol * hi:
            break
        if stop_below is not None and hi < stop_below:
            break
        if stop_above is not None and lo >= stop_above:
            break
        x = ax + x
        x /= x.max()
    else:
        raise ConvergenceError(f"power iteration did not converge in {max_iter} steps", x, (lo, hi))
    return lo, hi


def _perron_bracket(a: np.ndarray, tol: float, max_iter: int, stop_below: float | None = None,
                    stop_above: float | None = None) -> tuple[float, float]:
    """Bracket [lo, hi] on r(a), the max over irreducible diagonal blocks.

    ``stop_below`` / ``stop_above`` end the search as soon as the bracket
    settles ``r < stop_below`` or ``r >= stop_above``.
    """
    if a.shape[0] == 0:
        return 0.0, 0.0
    lo = hi = 0.0
    for comp in strong_components(a):
        blo, bhi = _irreducible_bracket(a[np.ix_(comp, comp)], tol, max_iter, stop_below, stop_above)
        lo, hi = max(lo, blo), max(hi, bhi)
        if stop_above is not None and lo >= stop_above:
            break
    return lo, hi


def spectral_radius(a: np.ndarray, tol: float = 1e-13, max_iter: int = 100_000) -> float:
    """Perron root of a square nonnegative matrix."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if np.any(a < 0) or not np.all(np.isfinite(a)):
        raise ValueError("matrix must be finite and nonnegative")
    lo, hi = _perron_bracket(a, tol, max_iter)
    return 0.5 * (lo + hi)


def eigen_lower_bound(a: np.ndarray) -> float:
    """(1/n) * sum_ij sqrt(a_ij a_ji), diagonal included; never exceeds r(a)."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if n == 0:
        return 0.0
    return float(np.sqrt(a * a.T).sum() / n)


def max_sir_power_control(gains: GainTable, links: Sequence[int]) -> float:
    """Largest common SIR reachable by any power assignment on ``links``."""
    if len(links) < 2:
        raise ValueError("need at least two links")
    r = spectral_radius(normalized_gain_matrix(gains, links))
    if r <= 1:
        raise ValueError(f"Perron root {r} <= 1: malformed normalized gain matrix")
    return 1.0 / (r - 1.0)


def pc_feasible(gains: GainTable, links: Sequence[int], beta: float) -> bool:
    """Power-control feasibility, max SIR > beta, i.e. r(A) < 1 + 1/beta."""
    if len(links) <= 1:
        return True
    a = normalized_gain_matrix(gains, links)
    thr = 1.0 + 1.0 / beta
    cols = a.sum(axis=0)
    # column sums bracket r(A)
    if cols.max() < thr:
        return True
    if cols.min() >= thr or eigen_lower_bound(a) >= thr:
        return False
    lo, hi = _perron_bracket(a, 1e-13, 100_000, stop_below=thr, stop_above=thr)
    return 0.5 * (lo + hi) < thr


def _check_size(n: int, limit: int):
    if n > limit:
        raise SizeGuardError(f"exhaustive search limited to n <= {limit}, got {n}")


def brute_force_opt(gains: GainTable, beta: float, weights: Sequence[float] | None = None,
                    max_n: int = MAX_UNIFORM_N) -> tuple[tuple[int, ...], float]:
    """Maximum-cardinality (or maximum-weight) feasible set under uniform power.

    Depth-first over include/exclude decisions. Feasibility is closed under
    subsets, so an infeasible partial set ends its branch; a branch also ends
    when its remaining weight cannot beat the incumbent.
    """
    n = len(gains)
    _check_size(n, max_n)
    if n == 0:
        return (), 0.0
    w = [1.0] * n if weights is None else [float(x) for x in weights]
    order = sorted(range(n), key=lambda i: (-w[i], i))
    aff = gains.affectance_matrix().tolist()
    lim = 1.0 / beta
    suffix = [0.0] * (n + 1)
    for k in range(n - 1, -1, -1):
        suffix[k] = suffix[k + 1] + w[order[k]]

    best_set: list[int] = []
    best_val = -1.0

    def dfs(k: int, chosen: list[int], loads: list[float], val: float):
        nonlocal best_set, best_val
        if val > best_val:
            best_val, best_set = val, list(chosen)
        if k == n or val + suffix[k] <= best_val:
            return
        i = order[k]
        row = aff[i]
        if loads[i] < lim and all(loads[m] + row[m] < lim for m in chosen):
            chosen.append(i)
            dfs(k + 1, chosen, [l + r for l, r in zip(loads, row)], val + w[i])
            chosen.pop()
        dfs(k + 1, chosen, loads, val)

    dfs(0, [], [0.0] * n, 0.0)
    return tuple(sorted(best_set)), best_val


def brute_force_opt_pc(gains: GainTable, beta: float, weights: Sequence[float] | None = None,
                       max_n: int = MAX_PC_N) -> tuple[tuple[int, ...], float]:
    """Maximum set feasible under some power assignment (one Perron test per node)."""
    n = len(gains)
    _check_size(n, max_n)
    if n == 0:
        return (), 0.0
    w = [1.0] * n if weights is None else [float(x) for x in weights]
    order = sorted(range(n), key=lambda i: (-w[i], i))
    suffix = [0.0] * (n + 1)
    for k in range(n - 1, -1, -1):
        suffix[k] = suffix[k + 1] + w[order[k]]

    best_set: list[int] = []
    best_val = -1.0

    def dfs(k: int, chosen: list[int], val: float):
        nonlocal best_set, best_val
        if val > best_val:
            best_val, best_set = val, list(chosen)
        if k == n or val + suffix[k] <= best_val:
            return
        i = order[k]
        chosen.append(i)
        if pc_feasible(gains, chosen, beta):
            dfs(k + 1, chosen, val + w[i])
        chosen.pop()
        dfs(k + 1, chosen, val)

    dfs(0, [], 0.0)
    return tuple(sorted(best_set)), best_val
