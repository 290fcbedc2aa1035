import math

import numpy as np
import pytest

from rmlab.errors import CostGuardError, PreconditionError, ShapeError
from rmlab.nets import (
    EpsNet,
    build_net,
    cardinality_bound,
    covering_check,
    net_norm_bounds,
    sample_sphere,
)
from rmlab.seeding import SeedStream


def s(*keys):
    return SeedStream(21).child(*keys)


def test_cardinality_bound_values():
    assert cardinality_bound(2, 0.5) == 20
    assert cardinality_bound(1, 0.5) == 2
    assert cardinality_bound(3, 1.0) == 54
    assert cardinality_bound(3, 0.5) == 150


def test_sphere_samples_are_unit():
    x = sample_sphere(4, 1000, s("sphere"))
    assert np.allclose(np.linalg.norm(x, axis=1), 1.0, atol=1e-14)


def test_one_dimensional_sphere_has_two_points():
    net = build_net(1, 0.5, s("n1"), candidate_count=10**4)
    assert sorted(net.points[:, 0].tolist()) == [-1.0, 1.0]


def test_circle_net_is_a_packing_within_bound():
    net = build_net(2, 0.5, s("n2"), candidate_count=10**5)
    # chord 0.5 means arc >= 2 asin(1/4); at most floor(2 pi / arc) points fit
    packing_max = math.floor(2 * math.pi / (2 * math.asin(0.25)))
    assert packing_max == 12
    assert len(net) <= packing_max <= cardinality_bound(2, 0.5)
    assert net.min_pairwise_distance() >= 0.5


def test_three_dimensional_net():
    net = build_net(3, 0.5, s("n3"), candidate_count=10**5)
    assert len(net) <= 150
    assert net.min_pairwise_distance() >= 0.5


def test_million_candidate_net_covers():
    net = build_net(2, 0.5, s("n2-big"), candidate_count=10**6)
    assert covering_check(net, 10**4, s("probe")).covered


@pytest.mark.parametrize("n,eps", [(2, 1.0), (3, 1.0)])
def test_unit_epsilon_nets(n, eps):
    net = build_net(n, eps, s("unit", n), candidate_count=10**5)
    assert len(net) <= cardinality_bound(n, eps)


def test_build_net_guards():
    with pytest.raises(CostGuardError):
        build_net(7, 0.5, s(), candidate_count=10**4)
    with pytest.raises(PreconditionError):
        build_net(2, 0.5, s(), candidate_count=100)
    with pytest.raises(PreconditionError):
        build_net(2, 1.5, s(), candidate_count=10**4)


def test_covering_self_and_single_point():
    cloud = sample_sphere(2, 2000, s("cloud"))
    net = EpsNet(2, 0.5, cloud)
    assert covering_check(net, 1000, s("p1")).covered
    lone = EpsNet(2, 0.5, np.array([[1.0, 0.0]]))
    rep = covering_check(lone, 1000, s("p2"))
    assert not rep.covered
    assert rep.worst_distance > 1.9


def test_covering_needs_probes():
    with pytest.raises(PreconditionError):
        covering_check(EpsNet(2, 0.5, np.array([[1.0, 0.0]])), 10, s())


def test_norm_bounds_identity_and_zero():
    net = build_net(2, 0.5, s("nb"), candidate_count=10**4)
    br = net_norm_bounds(np.eye(2), net)
    assert br.lower == pytest.approx(1.0, abs=1e-14)
    assert br.upper == pytest.approx(2.0, abs=1e-13)
    zero = net_norm_bounds(np.zeros((3, 2)), net)
    assert zero.lower == zero.upper == 0.0


def test_norm_bounds_bracket_exact_norm():
    net = build_net(5, 0.5, s("n5"), candidate_count=4 * 10**5)
    assert covering_check(net, 10**4, s("p5")).covered
    Ms = s("mats").generator().standard_normal((100, 5, 5))
    for M in Ms:
        br = net_norm_bounds(M, net)
        exact = np.linalg.svd(M, compute_uv=False)[0]
        assert br.lower <= exact <= br.upper


def test_norm_bounds_guards():
    net = EpsNet(2, 1.0, np.array([[1.0, 0.0]]))
    with pytest.raises(PreconditionError):
        net_norm_bounds(np.eye(2), net)
    with pytest.raises(ShapeError):
        net_norm_bounds(np.eye(3), EpsNet(2, 0.5, np.array([[1.0, 0.0]])))


def test_net_csv(tmp_path):
    net = EpsNet(2, 0.5, np.array([[1.0, 0.0], [0.0, 1.0]]))
    net.to_csv(tmp_path / "net.csv")
    assert np.array_equal(np.loadtxt(tmp_path / "net.csv", delimiter=",", ndmin=2), net.points)
