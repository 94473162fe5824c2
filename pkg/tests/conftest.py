"""Shared fixtures: tiny hand-checked instances plus hand-built fractional
configurations that force the dangerous-client machinery, which random desk
instances almost never reach (their relaxations come out integral)."""

import pytest

from ftclust.arith import Q
from ftclust.instances import FTMedInstance, make_metric
from ftclust.relaxation import canonical_from_opening
from ftclust.rounding import finish_pipeline


def explicit_metric(n, m, entries):
    """Full matrix from an upper-triangle dict {(a,b): d} over point
    indices (facilities first)."""
    size = n + m
    mat = [[Q(0)] * size for _ in range(size)]
    for (a, b), dist in entries.items():
        mat[a][b] = mat[b][a] = Q(dist)
    return make_metric("explicit", n, m, matrix=mat)


@pytest.fixture(scope="session")
def line_012():
    """Three facilities at 0,1,2 and one client at 0 (the running example)."""
    metric = make_metric(
        "line", 3, 1, facility_coords=[0, 1, 2], client_coords=[0]
    )
    return FTMedInstance(metric=metric, k=2, requirements=[2])


def dangerous_tail_instance():
    """One client at 0 with r=2: one full facility and a 44/45 spare
    co-located, the last 1/45 of volume far away -> the client is
    dangerous and the rounding polytope is genuinely fractional."""
    # facilities: f0 (y=1) and f1 (y=44/45) at the client, f2 (y=1/45) at 900,
    # f3/f4 half-open at 40/60 so padding and bundles have material to work on
    metric = make_metric(
        "line", 5, 2,
        facility_coords=[0, 0, 900, 40, 60],
        client_coords=[0, 50],
    )
    inst = FTMedInstance(metric=metric, k=3, requirements=[2, 1])
    y = [Q(1), Q(44, 45), Q(1, 45), Q(1, 2), Q(1, 2)]
    return inst, y


def conflict_pair_instance():
    """Two dangerous clients at positive distance that conflict: each owns
    49/100 of co-located mass, the missing 1/50 sits far away and is shared.
    Exercises the filtering step with a nontrivial witness."""
    # points: f0 (at c0), f1 (at c1), f2 (far), c0, c1; d(c0,c1) = 100
    D, M = 100, 22100
    entries = {
        (0, 1): D, (0, 2): M, (0, 3): 0, (0, 4): D,
        (1, 2): M, (1, 3): D, (1, 4): 0,
        (2, 3): M, (2, 4): M,
    }
    metric = explicit_metric(3, 2, entries)
    inst = FTMedInstance(metric=metric, k=1, requirements=[1, 1])
    y = [Q(49, 100), Q(49, 100), Q(1, 50)]
    return inst, y


def nested_pair_instance():
    """A dangerous r=1 client whose ball nests inside a dangerous r=2
    client's enlarged ball (the laminar recursion does real work)."""
    # points: f0 (at cB, y=1), f1 (at cS, y=49/50), f2 (far tail, y=1/50),
    # cB, cS; d(cB,cS)=10, tail at 5000 from everything
    entries = {
        (0, 1): 10, (0, 2): 5000, (0, 3): 0, (0, 4): 10,
        (1, 2): 5000, (1, 3): 10, (1, 4): 0,
        (2, 3): 5000, (2, 4): 5000,
    }
    metric = explicit_metric(3, 2, entries)
    inst = FTMedInstance(metric=metric, k=2, requirements=[2, 1])
    y = [Q(1), Q(49, 50), Q(1, 50)]
    return inst, y


SYNTHETIC_BUILDERS = {
    "dangerous-tail": dangerous_tail_instance,
    "conflict-pair": conflict_pair_instance,
    "nested-pair": nested_pair_instance,
}


@pytest.fixture(scope="session", params=sorted(SYNTHETIC_BUILDERS))
def synthetic_pipeline(request):
    inst, y = SYNTHETIC_BUILDERS[request.param]()
    fsol = canonical_from_opening(inst, y)
    return finish_pipeline(fsol)


@pytest.fixture(scope="session")
def synthetic_pipelines():
    out = {}
    for name, builder in SYNTHETIC_BUILDERS.items():
        inst, y = builder()
        out[name] = finish_pipeline(canonical_from_opening(inst, y))
    return out
