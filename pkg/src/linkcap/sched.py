"""Approximation algorithms for link capacity under shadowing.

The pipeline is: length classes -> well-separated classes -> clusters ->
strong-link selection per cluster -> affectance filter -> robust partition.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import GainTable, Instance, gpl_gains, in_set_affectance, length_partition

log = logging.getLogger(__name__)

N_SEPARATION_CLASSES = 49
_GRID_PERIOD = 7


class PreconditionError(ValueError):
    def __init__(self, msg: str, link: int | None = None):
        super().__init__(msg)
        self.link = link


@dataclass(frozen=True)
class Partition:
    bins: tuple[tuple[int, ...], ...]
    leftover: tuple[int, ...] = ()
    budget: int = 0
    overflow: int = 0  # bins opened beyond the budget

    @property
    def within_budget(self) -> bool:
        return len(self.bins) <= self.budget


@dataclass(frozen=True)
class Cluster:
    cell: tuple[int, int]
    links: tuple[int, ...]


@dataclass(frozen=True)
class SeparatedClass:
    key: tuple[int, int]
    clusters: tuple[Cluster, ...]

    @property
    def links(self) -> tuple[int, ...]:
        return tuple(i for c in self.clusters for i in c.links)


@dataclass(frozen=True)
class ClusterDecomposition:
    classes: tuple[SeparatedClass, ...]
    cell_side: float
    min_length: float
    origin: tuple[float, float]


@dataclass(frozen=True)
class SelectionResult:
    selected: tuple[int, ...]
    candidates: tuple[int, ...] = ()
    counters: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.selected)

    def to_dict(self) -> dict:
        return {
            "selected": list(self.selected),
            "candidates": list(self.candidates),
            "counters": self.counters,
        }


def _by_strength(gains: GainTable, links: Sequence[int]) -> list[int]:
    # strongest first, ties by index
    return sorted(links, key=lambda i: (-gains.signal[i], i))


def robust_partition(gains: GainTable, links: Sequence[int], beta: float,
                     beta_prime: float) -> Partition:
    """Split a set with ``a_S(j) <= 1/beta_prime`` into feasible bins.

    First-fit over links in nonincreasing signal order. The target budget is
    ``ceil(2 beta / beta_prime)``; overflowing bins are still feasible and are
    counted in ``Partition.overflow``.
    """
    links = list(links)
    budget = max(1, math.ceil(2 * beta / beta_prime)) if math.isfinite(beta_prime) else 1
    if not links:
        return Partition((), (), budget, 0)
    aff = in_set_affectance(gains, links)
    # relative slack absorbs the rounding in 1/beta' when beta' was measured from this set
    bad = np.nonzero(aff > (1.0 / beta_prime) * (1 + 1e-12))[0]
    if bad.size:
        j = links[int(bad[0])]
        raise PreconditionError(f"link {j} has affectance {aff[bad[0]]:.6g} > 1/beta'", j)

    limit = 1.0 / beta
    S, I = gains.signal, gains.interference
    members: list[list[int]] = []
    loads: list[np.ndarray] = []
    for j in _by_strength(gains, links):
        for b, bin_ in enumerate(members):
            # affectance of j on current members, and of members on j
            new_loads = loads[b] + I[j, bin_] / S[bin_]
            own = I[bin_, j].sum() / S[j]
            if own < limit and np.all(new_loads < limit):
                bin_.append(j)
                loads[b] = np.append(new_loads, own)
                break
        else:
            members.append([j])
            loads.append(np.zeros(1))
    overflow = max(0, len(members) - budget)
    if overflow:
        log.info("robust_partition: %d bins over budget %d", overflow, budget)
    return Partition(tuple(tuple(b) for b in members), (), budget, overflow)


def mean_signal(instance: Instance, links: Sequence[int]) -> float:
    """GPL signal of the shortest link in the set, P / l_min^alpha."""
    p = instance.params
    lmin = min(instance.links[i].length for i in links)
    return p.power / lmin**p.alpha


def cluster_select(instance: Instance, gains: GainTable, cluster: Sequence[int],
                   beta: float | None = None) -> SelectionResult:
    """Strong-link greedy on one cluster.

    A link joins S when its signal exceeds ``2 beta |S| S_bar`` with |S|
    counted before insertion; the output keeps the members of S whose
    in-set affectance is below 1/beta.
    """
    beta = instance.params.beta if beta is None else beta
    if not cluster:
        return SelectionResult((), (), {"cluster_size": 0, "s_size": 0, "threshold": 0.0})
    s_bar = mean_signal(instance, cluster)
    strong: list[int] = []
    for i in _by_strength(gains, cluster):
        if gains.signal[i] > 2 * beta * len(strong) * s_bar:
            strong.append(i)
        else:
            break
    aff = in_set_affectance(gains, strong)
    selected = tuple(i for i, a in zip(strong, aff) if a < 1.0 / beta)
    return SelectionResult(selected, tuple(strong), {
        "cluster_size": len(cluster),
        "s_size": len(strong),
        "threshold": 2 * beta * s_bar,
    })


def _check_equilength(instance: Instance, links: Sequence[int]) -> float:
    lengths = instance.lengths[list(links)]
    lmin = float(lengths.min())
    if lengths.max() / lmin >= 2:
        raise PreconditionError(f"not equilength: length ratio {lengths.max() / lmin:.4g} >= 2")
    return lmin


def well_separated_partition(instance: Instance,
                             links: Sequence[int] | None = None) -> ClusterDecomposition:
    """Grid the plane into cells of side l_min/2 and colour cells mod 7.

    Cells are anchored at the lower-left corner of the senders' bounding box.
    Each nonempty cell is a cluster; clusters of the same colour are
    pairwise separated by more than l_min.
    """
    links = list(range(len(instance))) if links is None else list(links)
    if not links:
        return ClusterDecomposition((), 0.0, 0.0, (0.0, 0.0))
    lmin = _check_equilength(instance, links)
    side = lmin / 2
    snd = instance.senders[links]
    origin = snd.min(axis=0)
    cells = np.floor((snd - origin) / side).astype(np.int64)
    by_class: dict[tuple[int, int], dict[tuple[int, int], list[int]]] = {}
    for i, (cx, cy) in zip(links, cells):
        key = (int(cx) % _GRID_PERIOD, int(cy) % _GRID_PERIOD)
        by_class.setdefault(key, {}).setdefault((int(cx), int(cy)), []).append(i)
    classes = tuple(
        SeparatedClass(key, tuple(Cluster(cell, tuple(m)) for cell, m in sorted(by_class[key].items())))
        for key in sorted(by_class)
    )
    return ClusterDecomposition(classes, side, lmin, (float(origin[0]), float(origin[1])))


def _value(sel: Sequence[int], weights: np.ndarray | None) -> float:
    return float(len(sel)) if weights is None else float(weights[list(sel)].sum())


def _separated_class_select(instance: Instance, gains: GainTable, gpl: GainTable,
                            sep: SeparatedClass, beta: float,
                            weights: np.ndarray | None) -> SelectionResult:
    strong: list[int] = []
    for cl in sep.clusters:
        strong.extend(cluster_select(instance, gains, cl.links, beta).candidates)
    strong.sort()
    # c: worst expected (GPL-interference) affectance over realized signals
    if len(strong) > 1:
        sub = gpl.interference[np.ix_(strong, strong)].copy()
        np.fill_diagonal(sub, 0.0)
        c = float((sub.sum(axis=0) / gains.signal[strong]).max())
        aff = in_set_affectance(gains, strong)
        kept = [j for j, a in zip(strong, aff) if a < 2 * c]
        part = robust_partition(gains, kept, beta, 1.0 / (2 * c))
    else:
        c = 0.0
        kept = list(strong)
        part = Partition((tuple(kept),) if kept else (), (), 1, 0)
    best: tuple[int, ...] = ()
    for b in part.bins:
        if _value(b, weights) > _value(best, weights):
            best = b
    return SelectionResult(tuple(sorted(best)), tuple(strong), {
        "class": list(sep.key),
        "clusters": len(sep.clusters),
        "s_size": len(strong),
        "c": c,
        "r_size": len(kept),
        "bins": len(part.bins),
        "budget": part.budget,
        "overflow": part.overflow,
    })


def equilength_capacity(instance: Instance, gains: GainTable,
                        links: Sequence[int] | None = None, beta: float | None = None,
                        weights: np.ndarray | None = None) -> SelectionResult:
    """Best result over all well-separated classes of an equilength set."""
    beta = instance.params.beta if beta is None else beta
    links = list(range(len(instance))) if links is None else list(links)
    if not links:
        return SelectionResult((), (), {"classes": 0})
    decomp = well_separated_partition(instance, links)
    gpl = gpl_gains(instance)
    best: SelectionResult | None = None
    for sep in decomp.classes:
        res = _separated_class_select(instance, gains, gpl, sep, beta, weights)
        if best is None or _value(res.selected, weights) > _value(best.selected, weights):
            best = res
    counters = dict(best.counters)
    counters["classes"] = len(decomp.classes)
    return SelectionResult(best.selected, best.candidates, counters)


def general_capacity(instance: Instance, gains: GainTable, beta: float | None = None,
                     weights: np.ndarray | None = None) -> SelectionResult:
    """Solve each doubling length class separately and keep the largest answer."""
    beta = instance.params.beta if beta is None else beta
    best = SelectionResult((), (), {"length_classes": 0})
    classes = length_partition(instance)
    for k, cls in enumerate(classes):
        res = equilength_capacity(instance, gains, cls, beta, weights)
        if k == 0 or _value(res.selected, weights) > _value(best.selected, weights):
            best = SelectionResult(res.selected, res.candidates, {**res.counters, "length_class": k})
    best.counters["length_classes"] = len(classes)
    return best
