"""Geometry, pathloss gains, affectance and feasibility.

Links are addressed by their position in ``Instance.links`` everywhere a
link set is passed around (``Sequence[int]``). ``Link.id`` is kept for I/O.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class DegenerateGeometryError(ValueError):
    """A sender coincides with some receiver, so a gain would be infinite."""


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinates: ({self.x}, {self.y})")

    def dist(self, other: "Point") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class Link:
    id: int
    sender: Point
    receiver: Point
    weight: float = 1.0

    def __post_init__(self):
        if not (self.weight >= 0 and math.isfinite(self.weight)):
            raise ValueError(f"link {self.id}: weight must be finite and >= 0")
        if self.length <= 0:
            raise DegenerateGeometryError(f"link {self.id}: sender equals receiver")

    @property
    def length(self) -> float:
        return self.sender.dist(self.receiver)


@dataclass(frozen=True)
class Params:
    power: float = 1.0
    alpha: float = 3.0
    beta: float = 1.0

    def __post_init__(self):
        if not (self.power > 0 and math.isfinite(self.power)):
            raise ValueError(f"power must be positive, got {self.power}")
        if not (self.alpha > 2 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be > 2, got {self.alpha}")
        if not (self.beta >= 1 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be >= 1, got {self.beta}")


@dataclass(frozen=True)
class Instance:
    links: tuple[Link, ...]
    params: Params = field(default_factory=Params)

    def __post_init__(self):
        object.__setattr__(self, "links", tuple(self.links))
        ids = [l.id for l in self.links]
        if len(set(ids)) != len(ids):
            raise ValueError("link ids must be unique")

    def __len__(self) -> int:
        return len(self.links)

    @property
    def lengths(self) -> np.ndarray:
        return np.array([l.length for l in self.links], dtype=float)

    @property
    def weights(self) -> np.ndarray:
        return np.array([l.weight for l in self.links], dtype=float)

    @property
    def senders(self) -> np.ndarray:
        return np.array([(l.sender.x, l.sender.y) for l in self.links], dtype=float).reshape(-1, 2)

    @property
    def receivers(self) -> np.ndarray:
        return np.array([(l.receiver.x, l.receiver.y) for l in self.links], dtype=float).reshape(-1, 2)

    def delta(self) -> float:
        """Max/min link length ratio (1 for empty or single-link instances)."""
        if not self.links:
            return 1.0
        lengths = self.lengths
        return float(lengths.max() / lengths.min())

    def subset(self, idx: Sequence[int]) -> "Instance":
        return Instance(tuple(self.links[i] for i in idx), self.params)


@dataclass(frozen=True)
class GainTable:
    """Realized signal strengths and pairwise interference for one world.

    ``interference[i, j]`` is the power of sender ``i`` measured at receiver
    ``j``. The diagonal is stored but never read by affectance operations.
    """

    signal: np.ndarray
    interference: np.ndarray

    def __post_init__(self):
        s = np.array(self.signal, dtype=float)
        m = np.array(self.interference, dtype=float).reshape(len(s), len(s))
        if not (np.all(np.isfinite(s)) and np.all(s > 0)):
            raise ValueError("signals must be positive and finite")
        if not (np.all(np.isfinite(m)) and np.all(m >= 0)):
            raise ValueError("interference must be nonnegative and finite")
        s.flags.writeable = False
        m.flags.writeable = False
        object.__setattr__(self, "signal", s)
        object.__setattr__(self, "interference", m)

    def __len__(self) -> int:
        return len(self.signal)

    def affectance_matrix(self) -> np.ndarray:
        """``a[i, j] = I_ij / S_j`` with a zero diagonal."""
        a = self.interference / self.signal[None, :]
        np.fill_diagonal(a, 0.0)
        return a

    def restrict(self, idx: Sequence[int]) -> "GainTable":
        idx = np.asarray(idx, dtype=int)
        return GainTable(self.signal[idx], self.interference[np.ix_(idx, idx)])


def gpl_gains(instance: Instance) -> GainTable:
    """Geometric pathloss: ``S_i = P / l_i^a`` and ``I_ji = P / d(s_j, r_i)^a``."""
    p = instance.params
    snd, rcv = instance.senders, instance.receivers
    d = np.sqrt(((snd[:, None, :] - rcv[None, :, :]) ** 2).sum(axis=-1))
    if np.any(d == 0):
        j, i = np.argwhere(d == 0)[0]
        raise DegenerateGeometryError(
            f"sender of link {instance.links[j].id} sits on receiver of link {instance.links[i].id}"
        )
    gains = p.power / d**p.alpha
    return GainTable(np.diag(gains).copy(), gains)


def affectance(gains: GainTable, i: int, j: int) -> float:
    """Affectance of link ``i`` on link ``j``: ``I_ij / S_j``."""
    if i == j:
        raise ValueError("affectance of a link on itself is undefined")
    return float(gains.interference[i, j] / gains.signal[j])


def set_affectance(gains: GainTable, links: Iterable[int], j: int) -> float:
    idx = [i for i in links if i != j]
    if not idx:
        return 0.0
    return float(gains.interference[idx, j].sum() / gains.signal[j])


def in_set_affectance(gains: GainTable, links: Sequence[int]) -> np.ndarray:
    """``a_S(j)`` for every ``j`` in ``links``, in the same order."""
    idx = np.asarray(links, dtype=int)
    if idx.size == 0:
        return np.zeros(0)
    sub = gains.interference[np.ix_(idx, idx)].copy()
    np.fill_diagonal(sub, 0.0)
    return sub.sum(axis=0) / gains.signal[idx]


def sir(gains: GainTable, links: Iterable[int], j: int) -> float:
    """Signal-to-interference ratio of ``j`` when ``links`` transmit (inf if alone)."""
    idx = [i for i in links if i != j]
    total = float(gains.interference[idx, j].sum()) if idx else 0.0
    return math.inf if total == 0 else float(gains.signal[j]) / total


def is_feasible(gains: GainTable, links: Sequence[int], beta: float) -> bool:
    """True iff every link in the set has ``a_S(j) < 1/beta``."""
    if len(links) <= 1:
        return True
    return bool(np.all(in_set_affectance(gains, links) < 1.0 / beta))


def length_partition(instance: Instance) -> list[list[int]]:
    """Bucket links by ``floor(log2(l / l_min))``; each class has ratio < 2."""
    if not instance.links:
        return []
    lengths = instance.lengths
    lmin = lengths.min()
    buckets: dict[int, list[int]] = {}
    for i, l in enumerate(lengths):
        k = int(math.floor(math.log2(l / lmin)))
        # guard log2 rounding at exact powers of two
        while lmin * 2.0 ** (k + 1) <= l:
            k += 1
        while k > 0 and lmin * 2.0**k > l:
            k -= 1
        buckets.setdefault(k, []).append(i)
    return [buckets[k] for k in sorted(buckets)]


# --- instance files -------------------------------------------------------

def _num(obj: dict, key: str, *, positive: bool = False, default=None) -> float:
    if key not in obj:
        if default is None:
            raise ValueError(f"missing field {key!r}")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValueError(f"field {key!r} must be a number")
    v = float(v)
    if not math.isfinite(v):
        raise ValueError(f"field {key!r} must be finite")
    if positive and v <= 0:
        raise ValueError(f"field {key!r} must be positive")
    return v


def instance_from_dict(data: dict) -> Instance:
    params = data.get("params", {})
    p = Params(
        power=_num(params, "power", positive=True, default=1.0),
        alpha=_num(params, "alpha", default=3.0),
        beta=_num(params, "beta", default=1.0),
    )
    links = []
    for k, raw in enumerate(data.get("links", [])):
        w = _num(raw, "weight", default=1.0)
        if w < 0:
            raise ValueError(f"link {k}: negative weight")
        links.append(Link(
            id=int(raw.get("id", k)),
            sender=Point(_num(raw, "sx"), _num(raw, "sy")),
            receiver=Point(_num(raw, "rx"), _num(raw, "ry")),
            weight=w,
        ))
    return Instance(tuple(links), p)


def instance_to_dict(instance: Instance) -> dict:
    p = instance.params
    return {
        "params": {"power": p.power, "alpha": p.alpha, "beta": p.beta},
        "links": [
            {"id": l.id, "sx": l.sender.x, "sy": l.sender.y,
             "rx": l.receiver.x, "ry": l.receiver.y, "weight": l.weight}
            for l in instance.links
        ],
    }


def load_instance(path) -> Instance:
    with open(path) as fh:
        # NaN/Infinity literals are rejected at parse time
        data = json.load(fh, parse_constant=_reject_constant)
    return instance_from_dict(data)


def dump_instance(instance: Instance, path=None) -> str:
    text = json.dumps(instance_to_dict(instance), indent=2)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text


def _reject_constant(name: str):
    raise ValueError(f"non-finite literal {name} not allowed in instance files")
