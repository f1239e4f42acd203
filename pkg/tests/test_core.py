import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from linkcap.core import (DegenerateGeometryError, GainTable, Instance, Params, affectance,
                          dump_instance, gpl_gains, in_set_affectance, instance_from_dict,
                          is_feasible, length_partition, load_instance, set_affectance, sir)

from conftest import colocated, make_link, random_instance


def test_gpl_unit_and_double_length():
    p = Params(1.0, 3.0, 1.0)
    inst = Instance((make_link(0, 0, 0, 1, 0), make_link(1, 0, 5, 2, 5)), p)
    g = gpl_gains(inst)
    assert g.signal[0] == 1.0
    assert g.signal[1] == 0.125


def test_gpl_interference_entry():
    # sender of link 0 at origin, receiver of link 1 at (3, 0)
    inst = Instance((make_link(0, 0, 0, 0, 1), make_link(1, 3, 1, 3, 0)), Params(1.0, 3.0))
    g = gpl_gains(inst)
    assert g.interference[0, 1] == pytest.approx(1 / 27, rel=1e-12)


def test_gpl_rejects_sender_on_other_receiver():
    inst = Instance((make_link(0, 0, 0, 1, 0), make_link(1, 1, 0, 2, 0)))
    with pytest.raises(DegenerateGeometryError):
        gpl_gains(inst)


def test_link_rejects_zero_length():
    with pytest.raises(DegenerateGeometryError):
        make_link(0, 1, 1, 1, 1)


def test_params_validation():
    with pytest.raises(ValueError):
        Params(alpha=2.0)
    with pytest.raises(ValueError):
        Params(beta=0.5)
    with pytest.raises(ValueError):
        Params(power=0)


def test_affectance_ratio():
    g = GainTable(np.array([1.0, 0.5]), np.array([[1.0, 0.1], [0.2, 0.5]]))
    assert affectance(g, 0, 1) == pytest.approx(0.2)
    with pytest.raises(ValueError):
        affectance(g, 1, 1)


def test_affectance_colocated_is_one():
    g = gpl_gains(colocated(2))
    assert affectance(g, 0, 1) == 1.0


def test_affectance_matches_distance_recompute(rng):
    inst = random_instance(rng, 3, params=Params(2.0, 3.5))
    g = gpl_gains(inst)
    for i, li in enumerate(inst.links):
        for j, lj in enumerate(inst.links):
            if i == j:
                continue
            d_ij = math.dist((li.sender.x, li.sender.y), (lj.receiver.x, lj.receiver.y))
            l_j = math.dist((lj.sender.x, lj.sender.y), (lj.receiver.x, lj.receiver.y))
            expected = (2.0 / d_ij**3.5) / (2.0 / l_j**3.5)
            assert affectance(g, i, j) == pytest.approx(expected, rel=1e-12)


def test_set_affectance_cases(rng):
    g = gpl_gains(colocated(3))
    assert set_affectance(g, [1], 1) == 0.0
    assert set_affectance(g, [0, 1, 2], 2) == pytest.approx(2.0)
    inst = random_instance(rng, 7)
    g = gpl_gains(inst)
    S = [0, 2, 3, 6]
    for j in range(7):
        brute = sum(g.interference[i, j] / g.signal[j] for i in S if i != j)
        assert set_affectance(g, S, j) == pytest.approx(brute, rel=1e-12)


def test_feasibility_examples():
    g = gpl_gains(colocated(2))
    assert is_feasible(g, [0], 1.0)
    assert not is_feasible(g, [0, 1], 1.0)
    far = Instance((make_link(0, 0, 0, 1, 0), make_link(1, 0, 10, 1, 10)), Params(1, 3, 1))
    gf = gpl_gains(far)
    assert max(affectance(gf, 0, 1), affectance(gf, 1, 0)) < 2e-3
    assert is_feasible(gf, [0, 1], 1.0)


def test_length_partition_examples():
    assert length_partition(colocated(4)) == [[0, 1, 2, 3]]
    two = Instance((make_link(0, 0, 0, 1, 0), make_link(1, 10, 0, 13, 0)))
    assert length_partition(two) == [[0], [1]]
    lens = [1, 1.5, 2.5, 7]
    inst = Instance(tuple(make_link(i, 20 * i, 0, 20 * i + l, 0) for i, l in enumerate(lens)))
    assert length_partition(inst) == [[0, 1], [2], [3]]


def test_length_partition_exact_powers_of_two():
    lens = [1, 2, 4]
    inst = Instance(tuple(make_link(i, 20 * i, 0, 20 * i + l, 0) for i, l in enumerate(lens)))
    classes = length_partition(inst)
    assert classes == [[0], [1], [2]]
    # floor(log2 D) + 1 classes at exact powers of two
    assert len(classes) == math.floor(math.log2(inst.delta())) + 1


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 25))
def test_length_partition_properties(seed, n):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, n, area=50, lmin=1, lmax=30)
    classes = length_partition(inst)
    flat = sorted(i for c in classes for i in c)
    assert flat == list(range(n))
    lengths = inst.lengths
    for c in classes:
        assert lengths[c].max() / lengths[c].min() < 2
    delta = inst.delta()
    assert len(classes) <= math.floor(math.log2(delta)) + 1
    if delta > 1 and not math.log2(delta).is_integer():
        assert len(classes) <= math.ceil(math.log2(delta))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), lam=st.floats(1e-3, 1e3))
def test_affectance_scale_invariant_in_power(seed, lam):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 6)
    scaled = Instance(inst.links, Params(power=lam, alpha=inst.params.alpha))
    a0 = gpl_gains(inst).affectance_matrix()
    a1 = gpl_gains(scaled).affectance_matrix()
    np.testing.assert_allclose(a0, a1, rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_feasible_sets_closed_under_subsets(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 8, area=6)
    g = gpl_gains(inst)
    for mask in range(1, 256):
        S = [i for i in range(8) if mask >> i & 1]
        if is_feasible(g, S, 1.0):
            for drop in S:
                assert is_feasible(g, [i for i in S if i != drop], 1.0)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), beta=st.floats(1.0, 5.0))
def test_sir_and_affectance_agree(seed, beta):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 6, area=5)
    g = gpl_gains(inst)
    S = [i for i in range(6) if rng.random() < 0.6]
    for j in S:
        lhs = sir(g, S, j) > beta
        rhs = set_affectance(g, S, j) < 1 / beta
        assert lhs == rhs


def test_in_set_affectance_empty():
    g = gpl_gains(colocated(2))
    assert in_set_affectance(g, []).size == 0


def test_instance_file_roundtrip(tmp_path, rng):
    inst = random_instance(rng, 5, weights=True, params=Params(2.0, 4.0, 1.5))
    path = tmp_path / "inst.json"
    dump_instance(inst, path)
    back = load_instance(path)
    assert back == inst


def test_instance_reader_rejects_bad_values(tmp_path):
    good = {"params": {"power": 1, "alpha": 3, "beta": 1},
            "links": [{"id": 0, "sx": 0, "sy": 0, "rx": 1, "ry": 0, "weight": 1}]}
    instance_from_dict(good)
    bad = json.loads(json.dumps(good))
    bad["links"][0]["weight"] = -1
    with pytest.raises(ValueError):
        instance_from_dict(bad)
    bad = json.loads(json.dumps(good))
    bad["params"]["power"] = -2
    with pytest.raises(ValueError):
        instance_from_dict(bad)
    path = tmp_path / "nan.json"
    path.write_text(json.dumps(good).replace('"sx": 0', '"sx": NaN'))
    with pytest.raises(ValueError):
        load_instance(path)


def test_gain_table_is_immutable():
    g = gpl_gains(colocated(2))
    with pytest.raises(ValueError):
        g.signal[0] = 3.0
