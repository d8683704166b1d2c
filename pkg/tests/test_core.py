"""Counting-layer tests: geometry, dispatch equality, and index-set sizes."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qfest import core
from qfest.core import (
    BallVolume,
    as_points,
    ball_volume,
    count_close_between,
    count_close_between_gap,
    count_close_within,
    count_close_within_gap,
    iter_pairs_between_gap,
    iter_pairs_within_gap,
    unit_ball_volume,
)


class TestBallVolume:
    def test_interval(self):
        assert ball_volume(1, 0.5).volume == pytest.approx(1.0, rel=1e-14)

    def test_unit_disc(self):
        assert ball_volume(2, 1.0).volume == pytest.approx(math.pi, rel=1e-14)

    def test_sphere_radius_two(self):
        assert ball_volume(3, 2.0).volume == pytest.approx(4.0 / 3.0 * math.pi * 8.0, rel=1e-14)

    def test_fields(self):
        bv = ball_volume(4, 0.25)
        assert bv == BallVolume(4, 0.25, unit_ball_volume(4) * 0.25**4)

    @pytest.mark.parametrize("d", [1, 2, 3, 5])
    def test_doubling_ratio(self, d):
        ratio = ball_volume(d, 0.4).volume / ball_volume(d, 0.2).volume
        assert ratio == pytest.approx(2.0**d, rel=1e-12)

    def test_monotone_in_radius(self):
        eps = np.linspace(0.1, 2.0, 25)
        vols = [ball_volume(3, e).volume for e in eps]
        assert all(a < b for a, b in zip(vols, vols[1:]))

    @pytest.mark.parametrize("bad", [0.0, -1.0, float("nan"), float("inf")])
    def test_rejects_bad_radius(self, bad):
        with pytest.raises(ValueError):
            ball_volume(2, bad)

    @pytest.mark.parametrize("bad", [0, -1, 1.5])
    def test_rejects_bad_dimension(self, bad):
        with pytest.raises(ValueError):
            unit_ball_volume(bad)


class TestValidation:
    def test_one_dimensional_promotion(self):
        pts = as_points([1.0, 2.0, 3.0])
        assert pts.shape == (3, 1)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            as_points(np.empty((0, 2)))

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            as_points([[0.0], [float("nan")]])

    def test_rejects_ragged(self):
        with pytest.raises(ValueError):
            as_points([[1.0, 2.0], [3.0]])

    def test_dimension_mismatch_between(self):
        with pytest.raises(ValueError):
            count_close_between([[0.0, 0.0]], [[0.0]], 1.0)

    def test_unequal_lengths_between(self):
        with pytest.raises(ValueError):
            count_close_between([0.0, 1.0], [0.0], 1.0)

    def test_negative_radius(self):
        with pytest.raises(ValueError):
            count_close_within([0.0, 1.0], -0.1)

    def test_gap_too_large(self):
        with pytest.raises(ValueError):
            count_close_within_gap([0.0, 1.0, 2.0], 1.0, 3)


class TestCountExamples:
    def test_within_fixture(self):
        assert count_close_within([0.0, 0.5, 2.0], 1.0) == 1

    def test_within_all_pairs_when_radius_covers_diameter(self):
        x = np.linspace(0, 1, 17)
        assert count_close_within(x, 2.0) == math.comb(17, 2)

    def test_within_zero_radius_distinct_points(self):
        assert count_close_within([0.0, 1.0, 2.0], 0.0) == 0

    def test_within_zero_radius_ties(self):
        assert count_close_within([1.0, 1.0, 2.0], 0.0) == 1

    def test_within_singleton(self):
        assert count_close_within([3.0], 1.0) == 0

    def test_between_single_pair(self):
        assert count_close_between([0.0], [0.4], 0.5) == 1

    def test_between_disjoint_clusters(self):
        assert count_close_between([0.0, 1.0], [10.0, 11.0], 0.5) == 0

    def test_between_fixture(self):
        assert count_close_between([0.0, 1.0], [0.5, 1.2], 0.6) == 3

    def test_between_includes_diagonal(self):
        assert count_close_between([0.0, 5.0], [0.0, 5.0], 0.1) == 2

    def test_within_gap_all_close(self):
        assert count_close_within_gap([0.0] * 5, 1.0, 2) == 3

    def test_within_gap_zero_matches_plain(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=40)
        assert count_close_within_gap(x, 0.3, 0) == count_close_within(x, 0.3)

    def test_between_gap_all_close(self):
        x = np.zeros(4)
        assert count_close_between_gap(x, x, 1.0, 1) == 2 * math.comb(3, 2)

    def test_between_gap_zero_excludes_diagonal_only(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=50)
        y = rng.normal(size=50)
        diag = int(np.count_nonzero((x - y) ** 2 <= 0.3**2))
        assert count_close_between_gap(x, y, 0.3, 0) == count_close_between(x, y, 0.3) - diag


class TestIndexSets:
    @pytest.mark.parametrize("n,gap", [(5, 2), (10, 0), (12, 11), (30, 7)])
    def test_within_cardinality(self, n, gap):
        assert sum(1 for _ in iter_pairs_within_gap(n, gap)) == math.comb(n - gap, 2)

    @pytest.mark.parametrize("n,gap", [(5, 2), (10, 0), (12, 11), (30, 7)])
    def test_between_cardinality(self, n, gap):
        assert sum(1 for _ in iter_pairs_between_gap(n, gap)) == 2 * math.comb(n - gap, 2)

    def test_within_gap_two_n_five_pairs(self):
        assert list(iter_pairs_within_gap(5, 2)) == [(0, 3), (0, 4), (1, 4)]


def _naive_within(x, eps, gap=None):
    pts = as_points(x)
    if gap is None:
        return core._count_within_naive(pts, eps * eps)
    return core._count_within_gap_naive(pts, eps * eps, gap)


def _naive_between(x, y, eps, gap=None):
    xp, yp = as_points(x), as_points(y)
    if gap is None:
        return core._count_between_naive(xp, yp, eps * eps)
    return core._count_between_gap_naive(xp, yp, eps * eps, gap)


def _random_instance(rng, min_n=2, max_n=220):
    n = int(rng.integers(min_n, max_n + 1))
    d = int(rng.integers(1, 4))
    scale = 10.0 ** rng.uniform(-6, 6)
    pts = rng.normal(size=(n, d)) * scale
    eps = float(rng.uniform(0, 2.5) * scale)
    return pts, eps


class TestDispatchMatchesNaive:
    """The sweep/grid paths must agree with the brute-force loops bit for bit."""

    def test_within_seeded_sweep(self):
        rng = np.random.default_rng(2024)
        for _ in range(120):
            pts, eps = _random_instance(rng, min_n=64)
            got = count_close_within(pts, eps)
            want = _naive_within(pts, eps)
            assert got == want

    def test_within_large_samples(self):
        rng = np.random.default_rng(2027)
        for _ in range(8):
            pts, eps = _random_instance(rng, min_n=300, max_n=500)
            assert count_close_within(pts, eps) == _naive_within(pts, eps)

    def test_between_seeded_sweep(self):
        rng = np.random.default_rng(2025)
        for _ in range(120):
            pts, eps = _random_instance(rng, min_n=64)
            other = rng.normal(size=pts.shape) * np.abs(pts).max()
            got = count_close_between(pts, other, eps)
            want = _naive_between(pts, other, eps)
            assert got == want

    def test_gap_variants_seeded(self):
        rng = np.random.default_rng(2026)
        for _ in range(80):
            pts, eps = _random_instance(rng, min_n=64, max_n=160)
            n = pts.shape[0]
            gap = int(rng.integers(0, n))
            other = rng.normal(size=pts.shape) * np.abs(pts).max()
            assert count_close_within_gap(pts, eps, gap) == _naive_within(pts, eps, gap)
            assert count_close_between_gap(pts, other, eps, gap) == _naive_between(pts, other, eps, gap)

    def test_duplicate_heavy_data(self):
        rng = np.random.default_rng(11)
        for d in (1, 2, 3):
            pts = rng.integers(0, 4, size=(150, d)).astype(float)
            for eps in (0.0, 1.0, 1.5, 10.0):
                assert count_close_within(pts, eps) == core._count_within_naive(
                    pts, eps * eps
                )

    def test_boundary_distances(self):
        # distances exactly at the radius must count (closed ball)
        x = np.array([0.0, 1.0, 2.0, 3.5])
        assert count_close_within(x, 1.0) == 2
        pts = np.concatenate([np.arange(100.0), [0.25]])
        assert count_close_within(pts, 1.0) == _naive_within(pts, 1.0)


@settings(max_examples=60, deadline=None)
@given(
    data=st.data(),
    n=st.integers(min_value=64, max_value=180),
    d=st.integers(min_value=1, max_value=3),
    eps=st.floats(min_value=0.0, max_value=6.0),
)
def test_property_within_equals_naive(data, n, d, eps):
    flat = data.draw(
        st.lists(
            st.floats(min_value=-20.0, max_value=20.0, allow_nan=False),
            min_size=n * d,
            max_size=n * d,
        )
    )
    pts = np.asarray(flat, dtype=float).reshape(n, d)
    assert count_close_within(pts, eps) == _naive_within(pts, eps)


@settings(max_examples=40, deadline=None)
@given(
    data=st.data(),
    n=st.integers(min_value=64, max_value=120),
    d=st.integers(min_value=1, max_value=2),
    eps=st.floats(min_value=0.0, max_value=4.0),
    gap=st.integers(min_value=0, max_value=60),
)
def test_property_gap_counts_equal_naive(data, n, d, eps, gap):
    flat = data.draw(
        st.lists(
            st.floats(min_value=-8.0, max_value=8.0, allow_nan=False),
            min_size=2 * n * d,
            max_size=2 * n * d,
        )
    )
    arr = np.asarray(flat, dtype=float).reshape(2, n, d)
    x, y = arr[0], arr[1]
    assert count_close_within_gap(x, eps, gap) == _naive_within(x, eps, gap)
    assert count_close_between_gap(x, y, eps, gap) == _naive_between(x, y, eps, gap)


class TestCountProperties:
    def test_monotone_in_radius(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(150, 2))
        counts = [count_close_within(x, e) for e in np.linspace(0, 3, 20)]
        assert all(a <= b for a, b in zip(counts, counts[1:]))

    def test_between_symmetry(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=130)
        y = rng.normal(size=130) + 0.5
        assert count_close_between(x, y, 0.2) == count_close_between(y, x, 0.2)

    @pytest.mark.parametrize("lam", [0.25, 0.5, 2.0, 8.0])
    def test_power_of_two_scaling_preserves_counts(self, lam):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(140, 2))
        y = rng.normal(size=(140, 2))
        eps = 0.4
        assert count_close_within(x * lam, eps * lam) == count_close_within(x, eps)
        assert count_close_between(x * lam, y * lam, eps * lam) == count_close_between(
            x, y, eps
        )

    def test_order_is_irrelevant_for_plain_counts(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=100)
        perm = rng.permutation(100)
        assert count_close_within(x, 0.3) == count_close_within(x[perm], 0.3)
