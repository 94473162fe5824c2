from ftclust.arith import Q
from ftclust.bundles import create_bundles
from ftclust.checks import check_bundle_lemma
from ftclust.instances import FTMedInstance, generate_instance, make_metric
from ftclust.lp import solve
from ftclust.relaxation import build_ftmed_lp, canonical_from_opening, normalize, pad_to_k


def test_single_client_single_bundle():
    metric = make_metric("line", 1, 1, facility_coords=[0], client_coords=[0])
    inst = FTMedInstance(metric=metric, k=1, requirements=[1])
    fsol = canonical_from_opening(inst, [1])
    fam = create_bundles(fsol)
    assert len(fam.bundles) == 1
    (members,) = fam.bundles.values()
    assert members == fsol.served[0]
    assert fam.queues == {0: [0]}


def test_co_located_clients_share_bundle():
    metric = make_metric("line", 1, 2, facility_coords=[0], client_coords=[0, 0])
    inst = FTMedInstance(metric=metric, k=1, requirements=[1, 1])
    fsol = canonical_from_opening(inst, [1])
    fam = create_bundles(fsol)
    assert len(fam.bundles) == 1  # second client reuses it via the overlap branch
    assert fam.queues[0] == fam.queues[1]
    assert fam.creator == {0: 0}


def test_bundle_count_disjointness_and_volume():
    for seed in range(8):
        inst = generate_instance("ftmed", "explicit", n=8, m=5, k=3, r_range=(1, 3), seed=seed)
        fsol = normalize(inst, solve(build_ftmed_lp(inst)))
        pad_to_k(fsol)
        fam = create_bundles(fsol)
        assert len(fam.bundles) <= sum(inst.requirements)
        fam.member_of()  # raises if bundles overlap
        for members in fam.bundles.values():
            assert fsol.store.volume(members) == 1
        for j, queue in fam.queues.items():
            assert len(queue) == inst.requirements[j]
            assert len(set(queue)) == len(queue)


def test_closeness_lemma_on_fractional_configs(synthetic_pipeline):
    assert all(c.ok for c in check_bundle_lemma(synthetic_pipeline))


def test_intersection_branch_carves_fraction():
    # two clients pulling on the same fractional mass from opposite sides
    metric = make_metric(
        "line", 3, 2, facility_coords=[0, 50, 100], client_coords=[10, 90]
    )
    inst = FTMedInstance(metric=metric, k=2, requirements=[1, 1])
    fsol = canonical_from_opening(inst, [Q(1, 2), Q(1), Q(1, 2)])
    fam = create_bundles(fsol)
    assert len(fam.bundles) <= 2
    for members in fam.bundles.values():
        assert fsol.store.volume(members) == 1
