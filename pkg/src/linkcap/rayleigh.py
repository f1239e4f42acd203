"""Rayleigh temporal fading on top of fixed (GPL or shadowed) mean gains.

Throughout, beta is folded into affectance: ``ahat = beta * a`` so a set is
feasible when every member has ``ahat_S(i) <= 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import GainTable

# threshold on expected affectance used by the sparsification rounding
K_SPARSIFY = 4 * math.log(11 / 2)


def as_probs(p, n: int) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (n,):
        raise ValueError(f"expected {n} probabilities, got shape {p.shape}")
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise ValueError("probabilities must lie in [0, 1]")
    return p


def _weights(weights, n: int) -> np.ndarray:
    return np.ones(n) if weights is None else np.asarray(weights, dtype=float)


def folded_affectance(gains: GainTable, beta: float) -> np.ndarray:
    return beta * gains.affectance_matrix()


@dataclass(frozen=True)
class FadingReport:
    q: np.ndarray
    success: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    expected_affectance: np.ndarray
    weight: float

    def rows(self) -> list[dict]:
        return [
            {"link": i, "q": float(self.q[i]), "Q": float(self.success[i]),
             "lower": float(self.lower[i]), "upper": float(self.upper[i]),
             "A": float(self.expected_affectance[i])}
            for i in range(len(self.q))
        ]


def success_probs(gains: GainTable, p, beta: float) -> np.ndarray:
    """Q_p(i) for every link.

    With exponential signal (mean S_i) and independent exponential
    interference (mean I_ji), ``P[S > beta * sum I] = prod_j 1/(1 + ahat_j(i))``
    over transmitting j; averaging over who transmits gives the product below.
    """
    n = len(gains)
    p = as_probs(p, n)
    ahat = folded_affectance(gains, beta)
    factors = 1.0 - p[:, None] + p[:, None] / (1.0 + ahat)
    np.fill_diagonal(factors, 1.0)
    return p * factors.prod(axis=0)


def success_prob(gains: GainTable, p, i: int, beta: float) -> float:
    return float(success_probs(gains, p, beta)[i])


def expected_affectance(gains: GainTable, p, beta: float) -> np.ndarray:
    """Ahat_p(i) = sum_{j != i} p_j * beta * a_j(i)."""
    p = as_probs(p, len(gains))
    return p @ folded_affectance(gains, beta)


def qbnd(gains: GainTable, p, i: int, beta: float) -> tuple[float, float]:
    """Exponential bracket (p_i e^-A, p_i e^-A/2) around Q_p(i)."""
    p = as_probs(p, len(gains))
    a = float(expected_affectance(gains, p, beta)[i])
    return p[i] * math.exp(-a), p[i] * math.exp(-a / 2)


def expected_weight(gains: GainTable, p, beta: float, weights=None) -> float:
    w = _weights(weights, len(gains))
    return float(w @ success_probs(gains, p, beta))


def fading_report(gains: GainTable, p, beta: float, weights=None) -> FadingReport:
    p = as_probs(p, len(gains))
    success = success_probs(gains, p, beta)
    a = expected_affectance(gains, p, beta)
    w = _weights(weights, len(gains))
    return FadingReport(p, success, p * np.exp(-a), p * np.exp(-a / 2), a, float(w @ success))


def indicator(links: Iterable[int], n: int) -> np.ndarray:
    p = np.zeros(n)
    p[list(links)] = 1.0
    return p


def _coordinate_ascent(ahat: np.ndarray, w: np.ndarray, p: np.ndarray,
                       max_passes: int) -> np.ndarray:
    n = len(p)
    p = p.copy()

    def value(p: np.ndarray) -> float:
        f = 1.0 - p[:, None] + p[:, None] / (1.0 + ahat)
        np.fill_diagonal(f, 1.0)
        return float(w @ (p * f.prod(axis=0)))

    for _ in range(max_passes):
        changed = False
        for i in range(n):
            old = p[i]
            p[i] = 0.0
            w0 = value(p)
            p[i] = 1.0
            w1 = value(p)
            # affine in p_i: an endpoint is optimal; ties go to 1
            p[i] = 1.0 if w1 >= w0 else 0.0
            changed |= p[i] != old
        if not changed:
            break
    return p


def optimize_probs(gains: GainTable, beta: float, weights=None,
                   candidates: Iterable[Sequence[int]] = (), max_passes: int = 200,
                   starts: Iterable[np.ndarray] | None = None) -> np.ndarray:
    """Heuristic maximizer of the expected successful weight.

    Cyclic coordinate ascent from the all-ones and all-zeros vectors, then
    compared with the indicator vectors of ``candidates``; the best vector
    found is returned.
    """
    n = len(gains)
    if n == 0:
        return np.zeros(0)
    w = _weights(weights, n)
    ahat = folded_affectance(gains, beta)
    if starts is None:
        starts = (np.ones(n), np.zeros(n))
    pool = [_coordinate_ascent(ahat, w, as_probs(s, n), max_passes) for s in starts]
    pool += [indicator(c, n) for c in candidates]
    values = [expected_weight(gains, p, beta, w) for p in pool]
    return pool[int(np.argmax(values))]


def sparsify(gains: GainTable, q, beta: float, rng: np.random.Generator,
             k: float = K_SPARSIFY) -> tuple[int, ...]:
    """Round a probability vector to a feasible set.

    Keep links with expected affectance at most k, subsample each with
    probability q_i / (2k), and return the sampled links whose realized
    affectance from the other sampled links is at most 1.
    """
    n = len(gains)
    q = as_probs(q, n)
    ahat = folded_affectance(gains, beta)
    low = (q @ ahat) <= k
    coins = rng.random(n)
    x = np.nonzero(low & (coins < q / (2 * k)))[0]
    if x.size == 0:
        return ()
    load = ahat[np.ix_(x, x)].sum(axis=0)
    return tuple(int(i) for i in x[load <= 1.0])


def mc_fading(gains: GainTable, p, beta: float, trials: int, rng: np.random.Generator,
              batch: int = 20_000) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo success frequencies and their standard errors.

    Each trial draws who transmits from p, then exponential signal and
    interference powers around the mean gains, and scores SIR > beta.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n = len(gains)
    p = as_probs(p, n)
    sig = np.asarray(gains.signal)
    inter = np.array(gains.interference)
    np.fill_diagonal(inter, 0.0)
    hits = np.zeros(n)
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        on = rng.random((b, n)) < p
        s = sig * rng.exponential(size=(b, n))
        fade = rng.exponential(size=(b, n, n))
        # total received interference at each receiver i from transmitting j
        total = np.einsum("bj,bji,ji->bi", on.astype(float), fade, inter)
        hits += (on & (s > beta * total)).sum(axis=0)
        done += b
    freq = hits / trials
    se = np.sqrt(freq * (1 - freq) / trials)
    return freq, se
