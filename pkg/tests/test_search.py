import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uwsbl import EstimationFailure, RefineOptions, SearchGrid
from uwsbl.search import _local_maxima, evaluate_grid, localize


def quadratic(center, scale=1.0):
    c = np.asarray(center, float)
    return lambda P: -scale * np.sum((np.atleast_2d(P) - c) ** 2, axis=1)


def test_grid_axes_and_order():
    g = SearchGrid([0, 0, 0], [2, 4, 0], [1, 2, 1])
    assert g.shape == (3, 3, 1)
    pts = g.points()
    assert len(pts) == g.size == 9
    np.testing.assert_array_equal(pts[:3], [[0, 0, 0], [0, 2, 0], [0, 4, 0]])
    np.testing.assert_array_equal(pts[3], [1, 0, 0])


def test_grid_validation():
    with pytest.raises(ValueError):
        SearchGrid([1, 0, 0], [0, 1, 1], [1, 1, 1])
    with pytest.raises(ValueError):
        SearchGrid([0, 0, 0], [1, 1, 1], [0, 1, 1])
    with pytest.raises(ValueError):
        SearchGrid([0, 0, 0], [1, 1, 1])
    with pytest.raises(ValueError):
        SearchGrid([0, 0, 0], [1, 1, 1], explicit=[[2, 0, 0]])
    with pytest.raises(ValueError):
        SearchGrid([0, 0, 0], [10, 10, 10], [1, 1, 1]).check_depth(5.0)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3),
    st.lists(st.floats(0.5, 20), min_size=3, max_size=3),
    st.lists(st.floats(0.1, 5), min_size=3, max_size=3),
)
def test_around_contains_center_as_lattice_point(center, hw, steps):
    g = SearchGrid.around(center, hw, steps)
    pts = g.points()
    assert np.min(np.max(np.abs(pts - center), axis=1)) <= 1e-9 * (1 + np.max(np.abs(center)))
    assert np.all(g.upper - g.lower <= 2 * np.asarray(hw) + 1e-9)


def test_around_respects_depth_limits():
    g = SearchGrid.around([0, 0, 3.0], [10, 10, 10], [1, 1, 2], depth_limits=(0, 100))
    assert g.lower[2] == pytest.approx(1.0)
    assert g.upper[2] == pytest.approx(13.0)
    assert np.any(np.all(np.isclose(g.points(), [0, 0, 3.0]), axis=1))


def test_grid_maximizer_is_lattice_argmax():
    g = SearchGrid([0, 0, 0], [10, 10, 10], [1, 1, 1])
    res = localize(quadratic([3.2, 6.9, 5.0]), g, RefineOptions(enabled=False))
    np.testing.assert_array_equal(res.grid_maximizer, [3, 7, 5])
    np.testing.assert_array_equal(res.estimate, res.grid_maximizer)


def test_refinement_converges_inside_box():
    g = SearchGrid([0, 0, 0], [10, 10, 10], [1, 1, 1])
    res = localize(quadratic([3.2, 6.9, 5.4]), g, RefineOptions(xatol=1e-9, fatol=1e-14, max_iter=2000))
    np.testing.assert_allclose(res.estimate, [3.2, 6.9, 5.4], atol=1e-6)
    assert res.objective_at_estimate >= res.objective_at_grid_maximizer


def test_refinement_clipped_to_box():
    g = SearchGrid([0, 0, 0], [10, 10, 10], [1, 1, 1])
    res = localize(quadratic([12.0, 5.0, 5.0]), g)
    assert np.all(res.estimate <= g.upper) and np.all(res.estimate >= g.lower)
    assert res.estimate[0] == pytest.approx(10.0, abs=1e-6)


def test_ties_keep_lowest_index():
    g = SearchGrid([0, 0, 0], [4, 4, 4], [1, 1, 1])
    res = localize(lambda P: np.zeros(len(P)), g, RefineOptions(enabled=False))
    np.testing.assert_array_equal(res.grid_maximizer, [0, 0, 0])


def test_nan_points_skipped_and_all_nan_fails():
    g = SearchGrid([0, 0, 0], [4, 4, 4], [1, 1, 1])

    def f(P):
        v = quadratic([2, 2, 2])(P)
        v[P[:, 0] == 2] = np.nan
        return v

    res = localize(f, g, RefineOptions(enabled=False))
    assert res.n_skipped == 25
    assert res.grid_maximizer[0] != 2
    with pytest.raises(EstimationFailure):
        localize(lambda P: np.full(len(P), np.nan), g)


def test_refinement_never_worse_on_rough_objective():
    rng = np.random.default_rng(2)
    g = SearchGrid([0, 0, 0], [10, 10, 10], [2, 2, 2])
    k = rng.standard_normal((6, 3))

    def f(P):
        return np.sum(np.cos(np.atleast_2d(P) @ k.T), axis=1)

    for n in (1, 4):
        res = localize(f, g, RefineOptions(n_starts=n))
        assert res.objective_at_estimate >= res.objective_at_grid_maximizer
        assert res.objective_at_estimate == pytest.approx(f(res.estimate)[0], rel=1e-12)


def test_multistart_not_worse_than_single_start():
    g = SearchGrid([0, 0, 0], [10, 10, 10], [2, 2, 2])
    k = np.random.default_rng(7).standard_normal((8, 3)) * 2

    def f(P):
        return np.sum(np.cos(np.atleast_2d(P) @ k.T), axis=1)

    one = localize(f, g, RefineOptions(n_starts=1))
    many = localize(f, g, RefineOptions(n_starts=5))
    assert many.objective_at_estimate >= one.objective_at_estimate


def test_local_maxima_of_two_bumps():
    x = np.arange(11.0)
    v = np.exp(-((x - 2) ** 2)) + 0.5 * np.exp(-((x - 8) ** 2))
    assert list(_local_maxima(v, (11,))) == [2, 8]


def test_fixed_axis_and_explicit_grid():
    g = SearchGrid([0, 0, 5], [10, 10, 5], [1, 1, 1])
    assert g.shape == (11, 11, 1)
    res = localize(quadratic([3.3, 4.4, 0.0]), g)
    assert res.estimate[2] == 5.0
    e = SearchGrid([0, 0, 0], [5, 5, 5], explicit=[[1, 1, 1], [4, 4, 4], [2, 2, 2]])
    res = localize(quadratic([2.1, 2.1, 2.1]), e, RefineOptions(enabled=False), keep_map=True)
    np.testing.assert_array_equal(res.grid_maximizer, [2, 2, 2])
    assert res.objective_map.shape == (3,)


def test_evaluate_grid_chunks_consistently():
    g = SearchGrid([0, 0, 0], [9, 9, 9], [1, 1, 1])
    f = quadratic([1, 2, 3])
    np.testing.assert_array_equal(evaluate_grid(f, g, chunk=7), f(g.points()))
