"""Stochastic shadowing: sampling realized gains around the GPL means,
tail and quantile queries, and the growth index g_n."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from statistics import NormalDist

import numpy as np

from .core import GainTable, Instance, gpl_gains

FAMILIES = ("lognormal", "heavytail", "degenerate")

HEAVYTAIL_TMAX = 64
# 1 / (6/pi^2 * sum_t 1/(t^2 2^t)); the series is Li2(1/2) = pi^2/12 - ln^2(2)/2
HEAVYTAIL_C = 1.0 / (6.0 / math.pi**2 * (math.pi**2 / 12 - math.log(2) ** 2 / 2))

_STD_NORMAL = NormalDist()


@dataclass(frozen=True)
class ShadowingSpec:
    family: str = "degenerate"
    sigma: float | None = None
    sample_signals: bool = True
    sample_interference: bool = True

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown shadowing family {self.family!r}")
        if self.family == "lognormal":
            if self.sigma is None or not (self.sigma > 0 and math.isfinite(self.sigma)):
                raise ValueError("lognormal shadowing needs sigma > 0")
        if self.family != "degenerate" and not (self.sample_signals or self.sample_interference):
            raise ValueError("at least one of sample_signals / sample_interference must be set")

    @classmethod
    def lognormal(cls, sigma: float, **kw) -> "ShadowingSpec":
        return cls("lognormal", sigma, **kw)

    @classmethod
    def heavytail(cls, **kw) -> "ShadowingSpec":
        return cls("heavytail", None, **kw)

    @classmethod
    def from_dict(cls, data: dict) -> "ShadowingSpec":
        return cls(
            family=data.get("family", "degenerate"),
            sigma=data.get("sigma"),
            sample_signals=bool(data.get("sample_signals", True)),
            sample_interference=bool(data.get("sample_interference", True)),
        )

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "sigma": self.sigma,
            "sample_signals": self.sample_signals,
            "sample_interference": self.sample_interference,
        }


@dataclass(frozen=True)
class GnEstimate:
    n: int
    g: float
    f_at_g: float
    bracket: tuple[float, float]
    # set when the tail jumps over the band so no g has f(g)*n/g in [1, 2]
    flagged: bool = False


# --- heavy-tail helpers ---------------------------------------------------

@lru_cache(maxsize=None)
def _heavytail_table() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Levels t = 1..TMAX, their probabilities, and the cumulative sums.

    Mass beyond TMAX is lumped onto TMAX; the change to the mean is below
    c * 2**-64 relative.
    """
    t = np.arange(1, HEAVYTAIL_TMAX + 1, dtype=float)
    prob = 6.0 / (math.pi**2 * t**2)
    prob[-1] = 1.0 - prob[:-1].sum()
    cum = np.cumsum(prob)
    cum[-1] = 1.0
    return t, prob, cum


def _heavytail_factors(rng: np.random.Generator, size) -> np.ndarray:
    t, _, cum = _heavytail_table()
    k = np.searchsorted(cum, rng.random(size), side="right")
    k = np.minimum(k, len(t) - 1)
    return HEAVYTAIL_C / 2.0 ** t[k]


def _factors(spec: ShadowingSpec, rng: np.random.Generator, size) -> np.ndarray:
    """Multiplicative unit-mean shadowing factors."""
    if spec.family == "lognormal":
        s = spec.sigma
        return np.exp(s * rng.standard_normal(size) - 0.5 * s * s)
    if spec.family == "heavytail":
        return _heavytail_factors(rng, size)
    return np.ones(size)


# --- operations -----------------------------------------------------------

def shadow(base: GainTable, spec: ShadowingSpec, rng: np.random.Generator) -> GainTable:
    """Apply independent unit-mean shadowing to every entry of ``base``.

    Signals are drawn first (n values), then the full n x n interference
    matrix in row-major order, so a given stream always yields the same table.
    """
    if spec.family == "degenerate":
        return base
    n = len(base)
    signal = np.array(base.signal)
    interference = np.array(base.interference)
    if spec.sample_signals:
        signal = signal * _factors(spec, rng, n)
    if spec.sample_interference:
        interference = interference * _factors(spec, rng, (n, n))
    np.fill_diagonal(interference, signal)
    return GainTable(signal, interference)


def sample_realization(instance: Instance, spec: ShadowingSpec,
                       rng: np.random.Generator) -> GainTable:
    return shadow(gpl_gains(instance), spec, rng)


def gaussian_tail(x: float) -> float:
    """Q(x) = P[Z > x] for standard normal Z (stable for large x)."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def gaussian_tail_bounds(x: float) -> tuple[float, float]:
    """Algebraic bracket x/(x^2+1) phi(x) < Q(x) < phi(x)/x, valid for x > 0."""
    if x <= 0:
        raise ValueError("bounds hold only for x > 0")
    phi = math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
    return x / (x * x + 1) * phi, phi / x


def tail(spec: ShadowingSpec, t: float) -> float:
    """f(t) = P[X > t * E[X]] for a shadowed entry X."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if spec.family == "degenerate":
        return 1.0 if t < 1 else 0.0
    if spec.family == "lognormal":
        if t == 0:
            return 1.0
        s = spec.sigma
        return gaussian_tail(math.log(t) / s + s / 2)
    levels, prob, _ = _heavytail_table()
    return float(prob[HEAVYTAIL_C / 2.0**levels > t].sum())


def quantile(spec: ShadowingSpec, mean: float, p: float) -> float:
    """Value x with P[X > x] = p for an entry of the given mean.

    For the discrete heavy-tail family this is the smallest support point
    whose exceedance probability is at most p.
    """
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    if spec.family == "degenerate":
        return mean
    if spec.family == "lognormal":
        s = spec.sigma
        z = -_STD_NORMAL.inv_cdf(p)
        return mean * math.exp(s * z - 0.5 * s * s)
    levels, prob, cum = _heavytail_table()
    exceed = np.concatenate(([0.0], cum[:-1]))  # P[X > c/2^t]
    k = int(np.nonzero(exceed <= p)[0][-1])
    return mean * HEAVYTAIL_C / 2.0 ** levels[k]


def gn(spec: ShadowingSpec, n: int, rel_tol: float = 1e-6) -> GnEstimate:
    """Growth index g_n = max(1, g'), g' the largest g with f(g) n / g in [1, 2].

    Bisects the nonincreasing map h(g) = f(g) n / g for the point where it
    drops below 1. If h jumps over the whole band there, the left end of the
    jump is returned and the estimate is flagged.
    """
    if n < 2:
        raise ValueError("n must be >= 2")

    def h(g: float) -> float:
        return tail(spec, g) * n / g

    if h(1.0) < 1.0:
        return GnEstimate(n, 1.0, tail(spec, 1.0), (1.0, 1.0))
    lo, hi = 1.0, 2.0
    while h(hi) >= 1.0:
        lo, hi = hi, 2 * hi
    while hi - lo > rel_tol * lo:
        mid = math.sqrt(lo * hi)
        if not lo < mid < hi:
            break
        if h(mid) >= 1.0:
            lo = mid
        else:
            hi = mid
    flagged = h(lo) > 2.0 + 1e-4
    return GnEstimate(n, lo, tail(spec, lo), (lo, hi), flagged)
