import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from symmlab.graphs import Order, build_space, product
from symmlab.operators import dirichlet_energy, heat_kernel
from symmlab.rearrange import natural_reflections, rearrange_function, steiner_rearrange
from symmlab.solver import ProblemSpec, random_problem, solve_elliptic
from symmlab.verify import (
    Report,
    SearchConfig,
    check_convolution_rearrangement,
    check_dirichlet_rearrangement,
    check_faber_krahn,
    check_hardy_littlewood,
    check_polarization_convergence,
    check_proposition,
    connected_subtrees,
    find_valid_order,
    find_violation,
    plateau_thetas,
    sweep_orders_for_violation,
)

from conftest import on_line

GOLDEN = (1 + math.sqrt(5)) / 2


def test_search_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(mode="nope")
    with pytest.raises(ValueError):
        SearchConfig(samples=0)
    with pytest.raises(ValueError):
        SearchConfig(tolerance=0)


def test_hardy_littlewood_hand_example():
    sp = build_space("line:1")
    f = on_line(sp, {-1: 1, 0: 3, 1: 2})
    g = on_line(sp, {-1: 2, 0: 0, 1: 1})
    lhs = f @ g
    rhs = rearrange_function(f, sp) @ rearrange_function(g, sp)
    assert (lhs, rhs, rhs - lhs) == (4, 8, 4)
    assert rearrange_function(f, sp) @ rearrange_function(f, sp) == f @ f


@pytest.mark.parametrize("s", ["line:10", "cycle:12", "tree:3,3", "octahedron", "cube"])
def test_hardy_littlewood_random(s):
    rep = check_hardy_littlewood(build_space(s), SearchConfig(samples=10_000, seed=3, tolerance=1e-12))
    assert rep.passed and rep.instances_tested == 10_000
    assert rep.worst_margin >= -1e-12


def test_hardy_littlewood_exhaustive_mode_counts_pairs():
    rep = check_hardy_littlewood(build_space("cycle:5"),
                                 SearchConfig("exhaustive-indicators", samples=10, tolerance=1e-12))
    assert rep.passed and rep.instances_tested == 10 + 4 ** 5


def test_convolution_at_t0_is_hardy_littlewood():
    rep = check_convolution_rearrangement(build_space("cycle:6"), [0.0],
                                          SearchConfig("exhaustive-indicators", tolerance=1e-12))
    assert rep.passed and rep.worst_margin == 0.0


def test_convolution_cycle4_hand_sets():
    sp = build_space("cycle:4")
    K = heat_kernel(sp, t=1.0).entries
    a, b = np.array([1.0, 0, 1, 0]), np.array([0, 1.0, 0, 1])
    As, Bs = np.array([1.0, 1, 0, 0]), np.array([1.0, 0, 0, 1])
    assert As @ K @ Bs - a @ K @ b >= 0
    np.testing.assert_array_equal(rearrange_function(a, sp), As)
    np.testing.assert_array_equal(rearrange_function(b, sp), As)


@pytest.mark.parametrize("s", ["line:4", "cycle:8", "tree:3,2", "octahedron"])
def test_convolution_exhaustive(s):
    rep = check_convolution_rearrangement(build_space(s), [0.1, 1, 10],
                                          SearchConfig("exhaustive-indicators", tolerance=1e-10))
    assert rep.passed, rep.details
    assert rep.details["mode"] == "exhaustive-indicators"


def test_convolution_random_on_larger_tree():
    rep = check_convolution_rearrangement(build_space("tree:3,3"), [0.1, 1, 10],
                                          SearchConfig(samples=5000, seed=1, tolerance=1e-10))
    assert rep.passed and rep.details["mode"] == "random-functions"


def test_convolution_detects_bad_octahedron_order():
    sp = build_space("octahedron")
    bad = Order((0, 2, 3, 4, 5, 1))  # 3-ball contains an antipodal pair
    rep = check_convolution_rearrangement(sp, [0.1, 1, 10], SearchConfig("exhaustive-indicators"),
                                          order=bad)
    assert not rep.passed
    assert set(rep.witness) == {"f", "g", "t"}


def test_dirichlet_hand_example_and_constant():
    sp = build_space("line:2")
    f = on_line(sp, {-1: 1.0, 1: 1.0})
    assert dirichlet_energy(f, sp) - dirichlet_energy(rearrange_function(f, sp), sp) == 2
    c = build_space("cycle:6")
    assert dirichlet_energy(np.ones(6), c) == dirichlet_energy(rearrange_function(np.ones(6), c), c) == 0


@pytest.mark.parametrize("s", ["cycle:6", "line:10", "tree:3,3", "octahedron"])
def test_dirichlet_random(s):
    rep = check_dirichlet_rearrangement(build_space(s),
                                        SearchConfig("gradient-ascent", samples=100_000, restarts=50, seed=2))
    assert rep.passed and rep.worst_margin >= -1e-9


def test_dirichlet_fails_on_cube():
    rep = check_dirichlet_rearrangement(build_space("cube"),
                                        SearchConfig("gradient-ascent", samples=1000, restarts=20))
    assert not rep.passed and rep.witness


def test_find_violation():
    assert find_violation(build_space("line:3"), cfg=SearchConfig(samples=2000, restarts=20)) is None
    cube = build_space("cube")
    # indicators never violate under the binary order; witnesses are non-indicator functions
    f = find_violation(cube, cfg=SearchConfig(samples=2000, restarts=20))
    assert len(np.unique(f)) > 2
    assert f is not None
    assert dirichlet_energy(rearrange_function(f, cube), cube) > dirichlet_energy(f, cube) + 1e-9


def test_sweep_torus_candidates():
    sp = build_space("torus:3,2")
    from symmlab.graphs import product_candidate_orders
    rep = sweep_orders_for_violation(sp, product_candidate_orders(sp), SearchConfig(samples=500, restarts=10),
                                     threshold=1e-6)
    assert rep.passed and rep.instances_tested == 4 and rep.worst_margin > 0


def test_sweep_reports_orders_without_violation():
    sp = build_space("line:2")
    orders = [sp.order, Order((0, 1, 2, 3, 4))]
    rep = sweep_orders_for_violation(sp, orders, SearchConfig(samples=300, restarts=5), threshold=1e-6)
    assert not rep.passed
    assert rep.details["orders_without_violation"] == 1
    assert rep.witness["orders_without_violation"] == [list(sp.order.permutation)]


def test_valid_orders_of_short_line():
    sp = build_space("line:2")
    found = find_valid_order(sp, [0.1, 1, 10], find_all=True)
    assert {o.permutation for o in found} == {(2, 3, 1, 4, 0), (2, 1, 3, 0, 4)}


def test_valid_orders_of_octahedron():
    sp = build_space("octahedron")
    first = find_valid_order(sp, [0.1, 1, 10])
    assert first == sp.order
    assert len(find_valid_order(sp, [0.1, 1, 10], find_all=True)) == 48


def test_no_valid_order_on_cube():
    assert find_valid_order(build_space("cube"), [0.1, 1, 10]) is None


def test_valid_order_size_limits():
    with pytest.raises(ValueError):
        find_valid_order(build_space("line:5"), [1.0])


def test_connected_subtree_counts():
    sp = build_space("tree:3,6")
    assert [len(connected_subtrees(sp, s)) for s in range(1, 7)] == [1, 3, 9, 28, 90, 297]


def test_faber_krahn_t3():
    rep = check_faber_krahn(3, 6)
    assert rep.passed
    by = rep.details["by_size"]
    assert math.isclose(by[1]["ball"], 3.0) and math.isclose(by[2]["ball"], 2.0)
    assert abs(by[4]["ball"] - (3 - math.sqrt(3))) < 1e-10
    path = [v for v in by[4]["distinct_values"] if abs(v - (3 - GOLDEN)) < 1e-10]
    assert path and by[4]["min_other"] == pytest.approx(3 - math.sqrt(3), abs=1e-10)
    with pytest.raises(ValueError):
        check_faber_krahn(2, 4)


def test_polarization_fixed_point_and_convergence():
    sp = build_space("cycle:5")
    refl = natural_reflections(sp)
    fs = rearrange_function(np.arange(5.0), sp)
    rep = check_polarization_convergence(sp, refl, functions=fs)
    assert rep.details["sweeps"] == 1 and rep.details["fixed_point"]
    rep = check_polarization_convergence(sp, refl, SearchConfig(samples=500, seed=4))
    assert rep.passed and rep.details["converged_fraction"] == 1.0
    assert rep.details["max_sup_error"] < 1e-12


def test_polarization_single_reflection_may_stall():
    sp = build_space("line:3")
    rep = check_polarization_convergence(sp, natural_reflections(sp)[:1], SearchConfig(samples=50))
    assert rep.passed
    assert rep.details["converged_fraction"] < 1.0


@pytest.mark.parametrize("s", ["line:10", "cycle:9"])
def test_polarization_acceptance_sizes(s):
    sp = build_space(s)
    rep = check_polarization_convergence(sp, natural_reflections(sp), SearchConfig(samples=1000, seed=0,
                                                                                   tolerance=1e-12))
    assert rep.passed and rep.details["converged_fraction"] == 1.0


def _symmetric_problem():
    m = build_space("line:3")
    sp = product(m, build_space("cycle:3").graph)
    omega = [sp.index(x, y) for x in m.order.permutation[:4] for y in range(3)]
    lam = np.zeros(sp.vertex_count)
    lam[omega] = 1.0
    return ProblemSpec(sp, frozenset(omega), lam=lam)


def test_proposition_symmetric_case_is_tight():
    p = _symmetric_problem()
    u = solve_elliptic(p)
    np.testing.assert_allclose(steiner_rearrange(u, p.product), u, atol=1e-12)
    thetas = plateau_thetas(p, 5, np.random.default_rng(0))
    rep = check_proposition(u, p, thetas)
    assert rep.passed
    assert abs(rep.details["proposition_margin"]) <= 1e-9
    rep0 = check_proposition(u, p, [np.zeros(p.product.vertex_count)])
    assert rep0.worst_margin == 0.0


def test_proposition_random_instances():
    sp = product(build_space("line:10"), build_space("cycle:5").graph)
    rng = np.random.default_rng(9)
    for i in range(5):
        p = random_problem(sp, rng, ("zero", "reciprocal:1")[i % 2], density=0.8)
        rep = check_proposition(solve_elliptic(p), p, plateau_thetas(p, 5, rng))
        assert rep.passed


def test_proposition_rejects_bad_input():
    p = _symmetric_problem()
    u = solve_elliptic(p)
    with pytest.raises(ValueError):
        check_proposition(u + 1.0, p, [])
    with pytest.raises(ValueError):
        check_proposition(u, p, [-np.ones(p.product.vertex_count)])


def test_reports_are_deterministic_and_timing_free():
    sp = build_space("cycle:7")
    a = check_dirichlet_rearrangement(sp, SearchConfig("gradient-ascent", samples=2000, restarts=5, seed=11))
    b = check_dirichlet_rearrangement(sp, SearchConfig("gradient-ascent", samples=2000, restarts=5, seed=11))
    assert a.to_json() == b.to_json()
    assert "elapsed" not in json.loads(a.to_json())
    assert "elapsed" in json.loads(a.to_json(timing=True))


margins = st.floats(-1, 1, allow_nan=False)


def _rep(m, n):
    return Report("x", n, m, m >= -1e-9, None if m >= -1e-9 else [[0, m]])


@given(st.lists(st.tuples(margins, st.integers(1, 100)), min_size=3, max_size=3))
def test_report_merge_is_associative_and_commutative(items):
    a, b, c = (_rep(m, n) for m, n in items)
    left = a.merge(b).merge(c)
    right = a.merge(b.merge(c))
    swapped = c.merge(a).merge(b)
    for r in (right, swapped):
        assert (r.worst_margin, r.instances_tested, r.passed) == \
               (left.worst_margin, left.instances_tested, left.passed)
