import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from linkcap.core import GainTable, Instance, Params, gpl_gains, in_set_affectance, is_feasible
from linkcap.experiments import Scenario, generate
from linkcap.sched import (PreconditionError, cluster_select, equilength_capacity,
                           general_capacity, robust_partition, well_separated_partition)
from linkcap.shadowing import ShadowingSpec, shadow

from conftest import colocated, make_link, random_gains, random_instance

LN1 = ShadowingSpec.lognormal(1.0)


def _bins_feasible(gains, part, beta):
    return all(is_feasible(gains, b, beta) for b in part.bins)


def test_robust_partition_singleton():
    g = gpl_gains(colocated(1))
    part = robust_partition(g, [0], 1.0, 1.0)
    assert part.bins == ((0,),)


def test_robust_partition_feasible_input_at_most_two_bins(rng):
    # a beta-feasible set with beta' = beta needs at most ceil(2) bins
    for _ in range(50):
        inst = random_instance(rng, 10, area=20)
        g = gpl_gains(inst)
        from linkcap.oracle import brute_force_opt
        S, _ = brute_force_opt(g, 1.0)
        part = robust_partition(g, S, 1.0, 1.0)
        assert len(part.bins) <= 2 and part.budget == 2
        assert _bins_feasible(g, part, 1.0)
        assert sorted(i for b in part.bins for i in b) == sorted(S)


def test_robust_partition_precondition_names_link():
    g = gpl_gains(colocated(3))
    with pytest.raises(PreconditionError) as exc:
        robust_partition(g, [0, 1, 2], 1.0, 1.0)
    assert exc.value.link in (0, 1, 2)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 14), beta=st.floats(1.0, 4.0))
def test_robust_partition_bins_always_feasible(seed, n, beta):
    rng = np.random.default_rng(seed)
    g = random_gains(rng, n)
    links = list(range(n))
    bp = 1.0 / in_set_affectance(g, links).max() if n > 1 else 1.0
    bp = min(bp * 0.999, 1e12) if n > 1 else bp
    part = robust_partition(g, links, beta, bp)
    assert _bins_feasible(g, part, beta)
    assert sorted(i for b in part.bins for i in b) == links


def test_cluster_select_colocated_gpl_picks_one():
    inst = colocated(6)
    res = cluster_select(inst, gpl_gains(inst), range(6))
    assert len(res.selected) == 1 and len(res.candidates) == 1


def test_cluster_select_threshold_example():
    # signals 10, 6, 3, 1 times S_bar: 10 > 0, 6 > 2, 3 <= 4 stops
    inst = colocated(4)
    g = gpl_gains(inst)
    sig = np.array([10.0, 6.0, 3.0, 1.0])
    g2 = GainTable(sig, np.where(np.eye(4, dtype=bool), sig, 1.0))
    res = cluster_select(inst, g2, range(4), 1.0)
    assert res.candidates == (0, 1)
    assert res.selected == (0, 1)
    assert is_feasible(g2, res.selected, 1.0)
    assert g.signal[0] == 1.0


def test_cluster_select_empty():
    inst = colocated(2)
    assert cluster_select(inst, gpl_gains(inst), []).selected == ()


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 40))
def test_cluster_select_strong_set_ordering(seed, n):
    rng = np.random.default_rng(seed)
    inst = colocated(n)
    g = shadow(gpl_gains(inst), LN1, rng)
    res = cluster_select(inst, g, range(n))
    S = list(res.candidates)
    # S is a prefix of the links sorted by signal, each above its threshold
    order = sorted(range(n), key=lambda i: (-g.signal[i], i))
    assert S == order[:len(S)]
    for k, i in enumerate(S):
        assert g.signal[i] > 2 * k
    if len(S) < n:
        assert g.signal[order[len(S)]] <= 2 * len(S)
    assert set(res.selected) <= set(S)
    assert is_feasible(g, res.selected, 1.0)


def _pairwise_separated(inst, decomp):
    snd, rcv = inst.senders, inst.receivers
    for cls in decomp.classes:
        for c1, c2 in itertools.combinations(cls.clusters, 2):
            for i in c1.links:
                for j in c2.links:
                    d = min(np.linalg.norm(snd[i] - rcv[j]), np.linalg.norm(snd[j] - rcv[i]))
                    if d <= decomp.min_length:
                        return False
    return True


def test_well_separated_examples():
    inst = colocated(5)
    d = well_separated_partition(inst)
    assert len(d.classes) == 1 and len(d.classes[0].clusters) == 1
    far = Instance((make_link(0, 0, 0, 1, 0), make_link(1, 100, 0, 101, 0)))
    d = well_separated_partition(far)
    assert sum(len(c.clusters) for c in d.classes) == 2
    with pytest.raises(PreconditionError):
        well_separated_partition(Instance((make_link(0, 0, 0, 1, 0), make_link(1, 5, 0, 8, 0))))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 80), area=st.floats(1.0, 30.0))
def test_well_separated_cover_and_separation(seed, n, area):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, n, area=area, lmin=1.0, lmax=1.99)
    d = well_separated_partition(inst)
    assert len(d.classes) <= 49
    flat = sorted(i for c in d.classes for i in c.links)
    assert flat == list(range(n))
    assert _pairwise_separated(inst, d)
    for cls in d.classes:
        for cl in cls.clusters:
            s = inst.senders[list(cl.links)]
            assert np.ptp(s, axis=0).max() <= d.min_length / 2 + 1e-12


def test_equilength_single_cluster_reduces_to_cluster_pipeline():
    inst = colocated(30)
    for seed in range(20):
        g = shadow(gpl_gains(inst), LN1, np.random.default_rng(seed))
        res = equilength_capacity(inst, g)
        S = sorted(cluster_select(inst, g, range(30)).candidates)
        assert sorted(res.candidates) == S
        if len(S) > 1:
            # GPL interference is 1 between co-located unit links
            c = max((len(S) - 1) / g.signal[j] for j in S)
            assert res.counters["c"] == pytest.approx(c, rel=1e-12)
            aff = in_set_affectance(g, S)
            R = [j for j, a in zip(S, aff) if a < 2 * c]
            bins = robust_partition(g, R, 1.0, 1 / (2 * c)).bins
            assert len(res.selected) == max(len(b) for b in bins)
        assert is_feasible(g, res.selected, 1.0)


def test_well_separated_seven_cells_apart():
    inst = Instance((make_link(0, 0, 0, 1, 0), make_link(1, 3.5, 0, 4.5, 0)))
    d = well_separated_partition(inst)
    assert len(d.classes) == 1 and len(d.classes[0].clusters) == 2
    assert _pairwise_separated(inst, d)


def _two_pairs(gap):
    return Instance((make_link(0, 0, 0, 1, 0), make_link(1, 0, 0, 1, 0),
                     make_link(2, gap, 0, gap + 1, 0), make_link(3, gap, 0, gap + 1, 0)))


def test_equilength_two_far_clusters_same_class():
    # 105 = 210 half-length cells, a multiple of 7: one class, two clusters
    inst = _two_pairs(105.0)
    g = gpl_gains(inst)
    res = equilength_capacity(inst, g)
    assert len(res.selected) == 2
    assert g.affectance_matrix()[0, 2] < 1e-6


def test_equilength_two_far_clusters_different_classes():
    # 100 = 200 cells, 200 mod 7 != 0: the clusters are solved separately
    inst = _two_pairs(100.0)
    d = well_separated_partition(inst)
    assert len(d.classes) == 2
    assert len(equilength_capacity(inst, gpl_gains(inst)).selected) == 1


def test_equilength_cluster_grid_always_feasible():
    sc = Scenario("cluster_grid", clusters=8, per_cluster=128, spacing=7.0, spec=LN1)
    for t in range(100):
        rng = np.random.default_rng(t)
        inst = generate(sc, rng)
        g = shadow(gpl_gains(inst), LN1, rng)
        res = equilength_capacity(inst, g)
        assert len(res.selected) >= 1
        assert is_feasible(g, res.selected, 1.0)


def test_general_capacity_equilength_identity(rng):
    inst = random_instance(rng, 15, area=8, lmin=1.0, lmax=1.9)
    g = shadow(gpl_gains(inst), LN1, rng)
    assert general_capacity(inst, g).selected == equilength_capacity(inst, g).selected


def test_general_capacity_is_max_over_length_classes():
    short = [make_link(i, 0, 0, 1, 0) for i in range(6)]
    long_ = [make_link(6 + i, 10_000, 0, 10_100, 0) for i in range(6)]
    inst = Instance(tuple(short + long_))
    for seed in range(20):
        g = shadow(gpl_gains(inst), LN1, np.random.default_rng(seed))
        per_class = [len(equilength_capacity(inst, g, c).selected) for c in ([0, 1, 2, 3, 4, 5],
                                                                          [6, 7, 8, 9, 10, 11])]
        res = general_capacity(inst, g)
        assert len(res.selected) == max(per_class)
        assert res.counters["length_classes"] == 2


def test_general_capacity_empty():
    inst = Instance(())
    assert general_capacity(inst, GainTable(np.zeros(0), np.zeros((0, 0)))).selected == ()


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 30), sigma=st.floats(0.0, 2.0))
def test_pipeline_outputs_feasible(seed, n, sigma):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, n, area=12, lmin=1, lmax=8, params=Params(beta=1.5))
    spec = ShadowingSpec.lognormal(sigma) if sigma > 0 else ShadowingSpec()
    g = shadow(gpl_gains(inst), spec, rng)
    res = general_capacity(inst, g)
    assert is_feasible(g, res.selected, 1.5)
    assert math.isfinite(len(res.selected))
