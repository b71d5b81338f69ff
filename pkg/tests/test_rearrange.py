import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from symmlab.graphs import Graph, Order, build_space, product, single_vertex
from symmlab.rearrange import (
    Reflection,
    is_rearranged,
    natural_reflections,
    polarize,
    rearrange_function,
    rearrange_set,
    similarly_ordered_companion,
    steiner_rearrange,
)

from conftest import line_index, on_line

values = st.floats(0, 100, allow_nan=False, allow_infinity=False)


def test_rearrange_set_examples():
    sp = build_space("line:2")
    assert rearrange_set([], sp) == frozenset()
    A = {line_index(sp, -2), line_index(sp, 2)}
    assert rearrange_set(A, sp) == {line_index(sp, 0), line_index(sp, 1)}
    assert rearrange_set(range(5), sp) == frozenset(range(5))
    with pytest.raises(ValueError):
        rearrange_set([7], sp)


def test_rearrange_function_cycle4():
    sp = build_space("cycle:4")
    np.testing.assert_array_equal(rearrange_function([1, 4, 2, 3], sp), [4, 3, 1, 2])


def test_constant_and_sorted_are_fixed():
    sp = build_space("tree:3,2")
    c = np.full(sp.vertex_count, 2.5)
    np.testing.assert_array_equal(rearrange_function(c, sp), c)
    f = np.empty(sp.vertex_count)
    f[sp.order.perm] = np.arange(sp.vertex_count, 0, -1)
    np.testing.assert_array_equal(rearrange_function(f, sp), f)


def test_rearrange_function_shape_mismatch():
    with pytest.raises(ValueError):
        rearrange_function([1, 2], build_space("cycle:3"))


def test_steiner_single_vertex_factor_matches_plain():
    m = build_space("line:3")
    sp = product(m, single_vertex())
    f = np.random.default_rng(0).random(7)
    np.testing.assert_array_equal(steiner_rearrange(f, sp), rearrange_function(f, m))


def test_steiner_x_independent_is_fixed():
    sp = product(build_space("line:2"), build_space("cycle:4").graph)
    u = np.tile([1.0, 3.0, 2.0, 0.5], 5)
    np.testing.assert_array_equal(steiner_rearrange(u, sp), u)


def test_steiner_two_isolated_fibers():
    m = build_space("line:1")
    sp = product(m, Graph(2, ()))
    U = np.array([[0, 2], [5, 2], [1, 2]], dtype=float)  # rows x = -1, 0, 1
    out = steiner_rearrange(U.ravel(), sp).reshape(3, 2)
    # order (0, 1, -1): values 5, 1, 0 land at x = 0, 1, -1
    np.testing.assert_array_equal(out[:, 0], [0, 5, 1])
    np.testing.assert_array_equal(out[:, 1], [2, 2, 2])


def test_polarize_two_vertices():
    r = Reflection.from_pairing([1, 0], Order((0, 1)))
    np.testing.assert_array_equal(polarize([2.0, 5.0], r), [5.0, 2.0])
    np.testing.assert_array_equal(polarize([5.0, 2.0], r), [5.0, 2.0])


def test_polarize_cycle5_hand_example():
    sp = build_space("cycle:5")
    r = Reflection.from_pairing([(1 - x) % 5 for x in range(5)], sp)
    np.testing.assert_array_equal(polarize(np.arange(5.0), r), [1, 0, 2, 3, 4])


def test_reflection_validation():
    with pytest.raises(ValueError):
        Reflection((1, 2, 0), frozenset())
    with pytest.raises(ValueError):
        Reflection((1, 0), frozenset({0, 1}))
    r = Reflection((1, 0), frozenset({1}))
    assert not r.compatible_with(Order((0, 1)))


def test_natural_reflection_counts():
    assert len(natural_reflections(build_space("line:3"))) == 13
    assert len(natural_reflections(build_space("cycle:9"))) == 9
    with pytest.raises(ValueError):
        natural_reflections(build_space("octahedron"))
    for s in ("line:3", "cycle:6"):
        sp = build_space(s)
        assert all(r.compatible_with(sp) for r in natural_reflections(sp))


def test_line_reflections_keep_support_inside():
    sp = build_space("line:2")
    f = on_line(sp, {-2: 1.0})
    for r in natural_reflections(sp):
        assert polarize(f, r).sum() == 1.0


def test_companion_hand_example():
    order = Order((0, 1, 2))
    u = np.array([3.0, 1.0, 2.0])
    theta = np.array([0.0, 4.0, 5.0])
    tt = similarly_ordered_companion(theta, u, order)
    np.testing.assert_array_equal(tt, [5, 0, 4])
    assert tt @ u == 23
    assert rearrange_function(theta, order) @ rearrange_function(u, order) == 23


def test_companion_ties():
    sp = build_space("cycle:5")
    theta = np.array([1.0, 3.0, 0.0, 2.0, 5.0])
    np.testing.assert_array_equal(similarly_ordered_companion(theta, np.ones(5), sp),
                                  rearrange_function(theta, sp))
    c = np.full(5, 7.0)
    np.testing.assert_array_equal(similarly_ordered_companion(c, np.arange(5.0), sp), c)


def _space_and_function(spaces=("line:4", "cycle:7", "tree:3,2", "octahedron", "cube")):
    return st.sampled_from(spaces).flatmap(
        lambda s: st.tuples(st.just(build_space(s)),
                            arrays(float, build_space(s).vertex_count, elements=values)))


@given(_space_and_function())
def test_rearrangement_properties(sf):
    sp, f = sf
    fs = rearrange_function(f, sp)
    assert is_rearranged(fs, sp)
    np.testing.assert_array_equal(np.sort(fs), np.sort(f))
    np.testing.assert_array_equal(rearrange_function(fs, sp), fs)
    # level sets of f^# are the rearranged level sets of f
    for t in np.unique(f):
        assert set(np.flatnonzero(fs > t)) == rearrange_set(np.flatnonzero(f > t), sp)


@given(_space_and_function(), st.data())
def test_rearrangement_is_sup_contraction(sf, data):
    sp, f = sf
    g = data.draw(arrays(float, sp.vertex_count, elements=values))
    lhs = np.max(np.abs(rearrange_function(f, sp) - rearrange_function(g, sp)))
    assert lhs <= np.max(np.abs(f - g)) + 1e-12


@given(_space_and_function(("line:4", "cycle:7")), st.data())
def test_polarization_properties(sf, data):
    sp, f = sf
    r = data.draw(st.sampled_from(natural_reflections(sp)))
    g = polarize(f, r)
    np.testing.assert_array_equal(np.sort(g), np.sort(f))
    np.testing.assert_array_equal(polarize(g, r), g)
    a, b = r.pairs
    assert np.all(g[a] >= g[b])
    np.testing.assert_array_equal(polarize(rearrange_function(f, sp), r), rearrange_function(f, sp))


@given(_space_and_function(("line:3", "cycle:6", "tree:3,2")), st.data())
def test_companion_attains_rearranged_sum(sf, data):
    sp, u = sf
    theta = data.draw(arrays(float, sp.vertex_count, elements=values))
    tt = similarly_ordered_companion(theta, u, sp)
    np.testing.assert_array_equal(np.sort(tt), np.sort(theta))
    expect = rearrange_function(theta, sp) @ rearrange_function(u, sp)
    assert abs(tt @ u - expect) <= 1e-9 * max(1.0, abs(expect))
