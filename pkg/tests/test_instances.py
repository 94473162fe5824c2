import json

import pytest

from ftclust.arith import Q
from ftclust.instances import (
    FTFLInstance,
    FTMedInstance,
    HSTNode,
    InfeasibleError,
    InstanceError,
    OpenSet,
    evaluate_ftfl_cost,
    evaluate_ftmed_cost,
    gap_family_instance,
    generate_instance,
    instance_from_dict,
    instance_to_dict,
    instances_equal,
    load_instance,
    make_metric,
    save_instance,
    validate_metric,
)


def test_line_distance():
    metric = make_metric("line", 2, 1, facility_coords=[0, 2], client_coords=[1])
    assert metric.distance("f0", "c0") == 1
    assert metric.distance("f0", "f0") == 0
    assert metric.distance("c0", "f1") == 1


def test_hst_two_leaf_distance():
    nodes = [
        HSTNode(children=(1, 2), edge_to_parent=None, leaf=None),
        HSTNode(children=(), edge_to_parent=Q(4), leaf="f0"),
        HSTNode(children=(), edge_to_parent=Q(4), leaf="c0"),
    ]
    metric = make_metric("hst", 1, 1, hst_nodes=nodes, hst_factor=2)
    assert metric.distance("f0", "c0") == 8
    assert metric.distance("f0", "f0") == 0


def test_unknown_point_id_rejected():
    metric = make_metric("line", 1, 1, facility_coords=[0], client_coords=[1])
    with pytest.raises(InstanceError):
        metric.distance("f1", "c0")
    with pytest.raises(InstanceError):
        metric.distance("x0", "c0")


def test_validate_two_point_metric_ok():
    metric = make_metric("explicit", 1, 1, matrix=[[0, 1], [1, 0]])
    assert validate_metric(metric) is None


def test_validate_triangle_violation():
    mat = [[0, 1, 5], [1, 0, 1], [5, 1, 0]]
    metric = make_metric("explicit", 2, 1, matrix=mat)
    report = validate_metric(metric)
    assert report is not None and "triangle" in report


def test_validate_asymmetric():
    mat = [[0, 1], [2, 0]]
    metric = make_metric("explicit", 1, 1, matrix=mat)
    report = validate_metric(metric)
    assert report is not None and "symmetry" in report


def test_evaluate_ftmed_examples():
    metric = make_metric("line", 3, 1, facility_coords=[0, 1, 2], client_coords=[0])
    inst = FTMedInstance(metric=metric, k=2, requirements=[2])
    assert evaluate_ftmed_cost(inst, OpenSet((0, 1))) == 1
    assert evaluate_ftmed_cost(inst, OpenSet((0, 2))) == 2
    co = FTMedInstance(
        metric=make_metric("line", 1, 1, facility_coords=[5], client_coords=[5]),
        k=1,
        requirements=[1],
    )
    assert evaluate_ftmed_cost(co, OpenSet((0,))) == 0


def test_evaluate_ftmed_infeasible():
    metric = make_metric("line", 3, 1, facility_coords=[0, 1, 2], client_coords=[0])
    inst = FTMedInstance(metric=metric, k=2, requirements=[2])
    with pytest.raises(InfeasibleError):
        evaluate_ftmed_cost(inst, OpenSet((0,)))


def test_evaluate_ftfl_examples():
    metric = make_metric("line", 2, 1, facility_coords=[1, 3], client_coords=[0])
    inst = FTFLInstance(metric=metric, opening_costs=[0, 0], weights=[[0, 1]])
    assert evaluate_ftfl_cost(inst, OpenSet((0, 1))) == 3
    free = FTFLInstance(metric=metric, opening_costs=[4, 6], weights=[[0, 0]])
    # all-zero weights are stripped, leaving no requirement
    assert evaluate_ftfl_cost(free, OpenSet((0, 1))) == 10
    with pytest.raises(InfeasibleError):
        evaluate_ftfl_cost(inst, OpenSet((0,)))


def test_roundtrip_identity(tmp_path):
    for kind, geometry in (("ftmed", "plane"), ("ftmed", "hst"), ("ftfl", "line"), ("ftmed", "explicit")):
        inst = generate_instance(
            kind, geometry, n=5, m=4, k=2 if kind == "ftmed" else None,
            r_range=(1, 2), seed=11,
        )
        path = tmp_path / f"{kind}-{geometry}.json"
        save_instance(inst, path)
        again = load_instance(path)
        assert instances_equal(inst, again)


def test_minimal_document():
    doc = {
        "kind": "ftmed",
        "metric": {"type": "explicit", "n": 1, "matrix": [[0, 1], [1, 0]]},
        "k": 1,
        "requirements": [1],
    }
    inst = instance_from_dict(doc)
    assert inst.n == 1 and inst.m == 1 and inst.k == 1


def test_k_zero_rejected():
    doc = {
        "kind": "ftmed",
        "metric": {"type": "explicit", "n": 1, "matrix": [[0, 1], [1, 0]]},
        "k": 0,
        "requirements": [1],
    }
    with pytest.raises(InstanceError):
        instance_from_dict(doc)


def test_requirement_above_k_rejected():
    metric = make_metric("line", 3, 1, facility_coords=[0, 1, 2], client_coords=[0])
    with pytest.raises(InstanceError):
        FTMedInstance(metric=metric, k=1, requirements=[2])


def test_rational_numbers_in_documents():
    doc = {
        "kind": "ftmed",
        "metric": {"type": "line", "facilities": ["1/3", 2], "clients": [0]},
        "k": 1,
        "requirements": [1],
    }
    inst = instance_from_dict(doc)
    assert inst.metric.distance("f0", "c0") == Q(1, 3)
    assert instance_to_dict(inst)["metric"]["facilities"][0] == "1/3"


def test_gap_family_shape():
    inst = generate_instance("ftfl", "line", n=4, m=1, gap_family=True)
    assert inst.metric.facility_coords == [0, 0, 0, 4]
    assert inst.metric.client_coords == [0]
    assert inst.opening_costs == [0, 0, 0, 0]
    assert inst.weights == [[0, 0, 0, 1]]
    med = generate_instance("ftmed", "line", n=4, m=1, gap_family=True)
    assert med.k == 4 and med.requirements == [4]


def test_generation_deterministic(tmp_path):
    a = generate_instance("ftmed", "plane", n=8, m=8, k=3, r_range=(1, 3), seed=7)
    b = generate_instance("ftmed", "plane", n=8, m=8, k=3, r_range=(1, 3), seed=7)
    pa, pb = tmp_path / "a.json", tmp_path / "b.json"
    save_instance(a, pa)
    save_instance(b, pb)
    assert pa.read_bytes() == pb.read_bytes()
    assert validate_metric(a.metric) is None


def test_generation_impossible_parameters():
    with pytest.raises(InstanceError):
        generate_instance("ftmed", "line", n=3, m=2, k=5, seed=0)


def test_cost_monotone_in_open_set():
    import itertools
    import random

    rng = random.Random(5)
    for seed in range(10):
        inst = generate_instance(
            "ftmed", "explicit", n=6, m=4, k=4, r_range=(1, 3), seed=seed
        )
        base = sorted(rng.sample(range(6), 4))
        cost = evaluate_ftmed_cost(inst, OpenSet(tuple(base)))
        assert cost >= 0
        for extra in range(6):
            if extra in base:
                continue
            bigger = evaluate_ftmed_cost(inst, OpenSet(tuple(base + [extra])))
            assert bigger <= cost


def test_gap_family_brute_force_optimum():
    from ftclust.exact import brute_force_ftfl, brute_force_ftmed

    for n in (3, 4, 5):
        med = gap_family_instance("ftmed", n)
        val, S = brute_force_ftmed(med)
        assert val == n and len(S) == n
        fl = gap_family_instance("ftfl", n)
        val, S = brute_force_ftfl(fl)
        assert val == n and len(S) == n


def test_hst_validation_rejects_growing_edges():
    nodes = [
        HSTNode(children=(1,), edge_to_parent=None, leaf=None),
        HSTNode(children=(2, 3), edge_to_parent=Q(1), leaf=None),
        HSTNode(children=(), edge_to_parent=Q(4), leaf="f0"),
        HSTNode(children=(), edge_to_parent=Q(4), leaf="c0"),
    ]
    metric = make_metric("hst", 1, 1, hst_nodes=nodes, hst_factor=2)
    report = validate_metric(metric)
    assert report is not None and "decrease" in report
