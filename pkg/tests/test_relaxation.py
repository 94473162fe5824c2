import pytest

from ftclust.arith import Q
from ftclust.instances import FTMedInstance, OpenSet, evaluate_ftmed_cost, make_metric
from ftclust.lp import EQ, GE, LE, solve
from ftclust.relaxation import (
    PipelineError,
    build_ftmed_lp,
    canonical_from_opening,
    d_av,
    d_max,
    normalize,
    pad_to_k,
    prefix_stats,
)


def line_instance(fac, cli, k, reqs):
    metric = make_metric("line", len(fac), len(cli), facility_coords=fac, client_coords=cli)
    return FTMedInstance(metric=metric, k=k, requirements=reqs)


def test_lp_shape_counts():
    inst = line_instance([0, 1], [0], 1, [1])
    lp = build_ftmed_lp(inst)
    assert lp.n_vars == 4  # 2 openings + 2 assignments
    assert len(lp.rows) == 2 + 1 + 1
    ops = [row.op for row in lp.rows]
    assert ops.count(GE) == 2 and ops.count(EQ) == 1 and ops.count(LE) == 1


def test_zero_cost_instance():
    inst = line_instance([7], [7], 1, [1])
    sol = solve(build_ftmed_lp(inst))
    assert sol.objective == 0
    fsol = normalize(inst, sol)
    assert fsol.lp_objective == 0


def test_line_lp_value_equals_brute_force():
    inst = line_instance([0, 1, 2], [0], 2, [2])
    sol = solve(build_ftmed_lp(inst))
    # brute force over the three 2-subsets gives 1 with {0,1}
    assert sol.objective == 1
    assert evaluate_ftmed_cost(inst, OpenSet((0, 1))) == 1


def test_normalize_and_pad_random_sweep():
    from ftclust.instances import generate_instance

    for seed in range(8):
        inst = generate_instance("ftmed", "explicit", n=7, m=5, k=3, r_range=(1, 3), seed=seed)
        sol = solve(build_ftmed_lp(inst))
        fsol = normalize(inst, sol)
        assert fsol.served_cost() == sol.objective
        for j, fj in fsol.served.items():
            assert fsol.volume(fj) == inst.requirements[j]
        pad_to_k(fsol)
        assert fsol.total_volume() == inst.k
        assert fsol.served_cost() == sol.objective  # padding is free


def test_splitting_operation_shape():
    # client needs 1 volume: 0.6 sits close, 0.4 must split the far 0.7
    inst = line_instance([0, 1], [0], 2, [1])
    fsol = canonical_from_opening(inst, [Q(3, 5), Q(7, 10)])
    fj = fsol.served[0]
    masses = sorted((fsol.d(0, c), fsol.store.y(c)) for c in fj)
    assert masses == [(Q(0), Q(3, 5)), (Q(1), Q(2, 5))]
    # the far facility now exists as two clones with the same parent
    clones = [c for c in fsol.store.clones.values() if c.parent == 1]
    assert sorted(c.y for c in clones) == [Q(3, 10), Q(2, 5)]


def test_already_integral_no_split():
    inst = line_instance([0, 1, 2], [0], 2, [2])
    fsol = canonical_from_opening(inst, [1, 1, 0])
    assert len(fsol.store.clones) == 2  # zero-mass dropped, no splits
    assert all(c.y == 1 for c in fsol.store.clones.values())


def test_closest_volume_split_at_mass_one():
    inst = line_instance([1, 2], [0], 2, [1])
    fsol = canonical_from_opening(inst, [Q(3, 5), Q(3, 5)])
    fj = fsol.served[0]
    got = sorted((fsol.d(0, c), fsol.store.y(c)) for c in fj)
    assert got == [(Q(1), Q(3, 5)), (Q(2), Q(2, 5))]


def test_prefix_stats_examples():
    inst = line_instance([1, 3], [0], 2, [1])
    fsol = canonical_from_opening(inst, [Q(1, 2), Q(1, 2)])
    st = prefix_stats(fsol, 0, fsol.served[0], 1)
    assert st.d_av == 2 and st.d_max == 3

    inst = line_instance([4, 4], [0], 2, [2])
    fsol = canonical_from_opening(inst, [1, 1])
    st = prefix_stats(fsol, 0, fsol.served[0], 2)
    assert st.d_av == 4 and st.d_max == 4  # degenerate location

    inst = line_instance([1, 5], [0], 2, [2])
    fsol = canonical_from_opening(inst, [1, 1])
    st = prefix_stats(fsol, 0, fsol.served[0], 2)
    assert st.d_av == 5 and st.d_max == 5  # second unit is the far facility


def test_prefix_stats_insufficient_volume():
    inst = line_instance([1], [0], 1, [1])
    fsol = canonical_from_opening(inst, [1])
    with pytest.raises(PipelineError):
        prefix_stats(fsol, 0, fsol.served[0], 2)


def test_pad_fills_lowest_parents_first():
    inst = line_instance([0, 5], [0], 2, [1])
    fsol = canonical_from_opening(inst, [Q(1, 2), Q(1, 2)])
    pad_to_k(fsol)
    assert fsol.total_volume() == 2
    by_parent = fsol.store.parent_classes()
    assert fsol.store.volume(by_parent[0]) == 1
    assert fsol.store.volume(by_parent[1]) == 1


def test_pad_noop_when_full():
    inst = line_instance([0, 5], [0], 2, [1])
    fsol = canonical_from_opening(inst, [1, 1])
    before = len(fsol.store.clones)
    pad_to_k(fsol)
    assert len(fsol.store.clones) == before


def test_facts_hold_on_pipelines():
    from ftclust.checks import check_facts
    from ftclust.instances import generate_instance

    for seed in range(6):
        inst = generate_instance("ftmed", "plane", n=8, m=6, k=3, r_range=(1, 3), seed=seed)
        fsol = normalize(inst, solve(build_ftmed_lp(inst)))
        assert all(c.ok for c in check_facts(fsol))


def test_normalize_rejects_non_optimal():
    from ftclust.lp import LPSolution

    inst = line_instance([0, 1], [0], 1, [1])
    fake = LPSolution(status="infeasible", x=None, objective=None)
    with pytest.raises(PipelineError):
        normalize(inst, fake)
