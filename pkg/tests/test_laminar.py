import pytest

from ftclust.arith import Q
from ftclust.checks import check_laminar_lemmas
from ftclust.instances import FTMedInstance, generate_instance, make_metric
from ftclust.laminar import (
    ClientStats,
    DangerReport,
    build_balls,
    build_laminar,
    classify_clients,
    filter_dangerous,
    verify_laminar,
)
from ftclust.relaxation import canonical_from_opening
from ftclust.rounding import finish_pipeline, run_pipeline

from conftest import conflict_pair_instance, nested_pair_instance


def tail_client_fsol(d_far, q):
    """One client at 0 with r=1: mass 1-q at the client, q at distance d_far."""
    metric = make_metric("line", 2, 1, facility_coords=[0, d_far], client_coords=[0])
    inst = FTMedInstance(metric=metric, k=1, requirements=[1])
    return canonical_from_opening(inst, [1 - q, q])


def test_classification_threshold():
    # d_max = 90, last-unit average 2 -> dangerous (45x threshold, inclusive)
    fsol = tail_client_fsol(90, Q(1, 45))
    rep = classify_clients(fsol)
    assert rep.dangerous == [0]
    # d_max = 44 with last-unit average 1 stays safe (44 < 45)
    fsol = tail_client_fsol(44, Q(1, 44))
    rep = classify_clients(fsol)
    assert rep.safe == [0]


def test_zero_radius_client_is_safe():
    metric = make_metric("line", 1, 1, facility_coords=[0], client_coords=[0])
    inst = FTMedInstance(metric=metric, k=1, requirements=[1])
    fsol = canonical_from_opening(inst, [1])
    rep = classify_clients(fsol)
    assert rep.safe == [0] and not rep.dangerous


def test_filter_co_located_conflict():
    metric = make_metric("line", 2, 2, facility_coords=[0, 90], client_coords=[0, 0])
    inst = FTMedInstance(metric=metric, k=1, requirements=[1, 1])
    fsol = canonical_from_opening(inst, [Q(44, 45), Q(1, 45)])
    rep = classify_clients(fsol)
    assert rep.dangerous == [0, 1]
    filter_dangerous(fsol, rep)
    assert rep.filtered == [0]  # distance zero always conflicts; index tie
    assert rep.witnesses == {1: 0}


def test_filter_distinct_requirements_all_survive():
    inst, y = nested_pair_instance()
    fsol = canonical_from_opening(inst, y)
    rep = classify_clients(fsol)
    assert sorted(rep.dangerous) == [0, 1]
    filter_dangerous(fsol, rep)
    assert sorted(rep.filtered) == [0, 1]  # requirements 2 and 1 cannot conflict


def test_filter_positive_distance_conflict():
    inst, y = conflict_pair_instance()
    fsol = canonical_from_opening(inst, y)
    rep = classify_clients(fsol)
    assert sorted(rep.dangerous) == [0, 1]
    filter_dangerous(fsol, rep)
    assert rep.filtered == [0] and rep.witnesses == {1: 0}


def test_filter_line_trace_with_synthetic_stats():
    # three clients at 0, 5, 10 with equal average radius 1: neighbours
    # conflict (5 <= 6), the far pair does not (10 > 6)
    metric = make_metric("line", 3, 3, facility_coords=[0, 5, 10], client_coords=[0, 5, 10])
    inst = FTMedInstance(metric=metric, k=3, requirements=[1, 1, 1])
    fsol = canonical_from_opening(inst, [1, 1, 1])
    stats = {
        j: ClientStats(r=1, d_av=Q(1), d_max=Q(50), d_av_r=Q(1)) for j in range(3)
    }
    rep = DangerReport(stats=stats, safe=[], dangerous=[0, 1, 2], filtered=[], witnesses={})
    filter_dangerous(fsol, rep)
    assert rep.filtered == [0, 2]
    assert rep.witnesses == {1: 0}


def test_ball_radius_and_membership():
    fsol = tail_client_fsol(90, Q(1, 45))
    rep = classify_clients(fsol)
    filter_dangerous(fsol, rep)
    balls = build_balls(fsol, rep)
    # radius 90/15 = 6 keeps only the co-located mass
    assert all(fsol.d(0, c) == 0 for c in balls[0])
    assert fsol.volume(balls[0]) == Q(44, 45)


def test_ball_volume_lemma_bounds(synthetic_pipeline):
    names = {c.name: c for c in check_laminar_lemmas(synthetic_pipeline)}
    assert names["ball-volume-window"].ok
    assert names["enlarged-ball-volume-window"].ok
    assert names["filtered-separation"].ok
    assert names["radius-geometric-decrease"].ok
    assert names["enlarged-ball-radius"].ok
    assert names["clone-parent-atomicity"].ok
    assert names["laminar-family"].ok


def test_single_dangerous_client_enlargement_is_identity():
    fsol = tail_client_fsol(90, Q(1, 45))
    rep = classify_clients(fsol)
    filter_dangerous(fsol, rep)
    balls = build_balls(fsol, rep)
    fam = build_laminar(fsol, rep, balls)
    assert fam.enlarged[0] == balls[0]


def test_nested_pair_enlargement():
    inst, y = nested_pair_instance()
    fsol = canonical_from_opening(inst, y)
    rep = classify_clients(fsol)
    filter_dangerous(fsol, rep)
    balls = build_balls(fsol, rep)
    fam = build_laminar(fsol, rep, balls)
    small, big = fam.enlarged[1], fam.enlarged[0]
    assert small < big  # proper nesting created by the recursion


def test_disjoint_same_requirement_balls():
    # two dangerous clients far apart with equal requirement: disjoint balls
    metric = make_metric(
        "line", 4, 2,
        facility_coords=[0, 90, 100000, 100090],
        client_coords=[0, 100000],
    )
    inst = FTMedInstance(metric=metric, k=2, requirements=[1, 1])
    fsol = canonical_from_opening(inst, [Q(44, 45), Q(1, 45), Q(44, 45), Q(1, 45)])
    rep = classify_clients(fsol)
    assert sorted(rep.dangerous) == [0, 1]
    filter_dangerous(fsol, rep)
    assert sorted(rep.filtered) == [0, 1]
    balls = build_balls(fsol, rep)
    fam = build_laminar(fsol, rep, balls)
    assert not (fam.enlarged[0] & fam.enlarged[1])


def test_verify_laminar_cases():
    chain = [frozenset({1}), frozenset({1, 2}), frozenset({1, 2, 3})]
    assert verify_laminar(chain) is None
    crossing = [frozenset({1, 2}), frozenset({2, 3})]
    assert verify_laminar(crossing) == (0, 1)


def test_laminarity_random_regression():
    count = 0
    for seed in range(60):
        inst = generate_instance(
            "ftmed", "explicit", n=6, m=4, k=2, r_range=(1, 2), seed=seed
        )
        art = run_pipeline(inst)
        assert verify_laminar(art.laminar.sets()) is None
        count += 1
    assert count == 60
