"""Tests for sample grids and the sweep helper."""

import numpy as np
import pytest

from hybridzeno.helpers.sampling import box_samples, halton_points, pinned_copies, scaled_samples, sweep


class TestHalton:
    def test_deterministic(self):
        a = halton_points([(0.0, 1.0), (-2.0, 2.0)], 64, seed=5)
        b = halton_points([(0.0, 1.0), (-2.0, 2.0)], 64, seed=5)
        c = halton_points([(0.0, 1.0), (-2.0, 2.0)], 64, seed=6)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_within_bounds(self):
        points = halton_points([(0.0, 5.0), (-10.0, 10.0), (-5.0, 5.0)], 500)
        assert points.shape == (500, 3)
        assert np.all(points[:, 0] >= 0.0) and np.all(points[:, 0] <= 5.0)
        assert np.all(np.abs(points[:, 1]) <= 10.0)
        assert np.all(np.abs(points[:, 2]) <= 5.0)

    def test_degenerate_interval(self):
        points = halton_points([(1.0, 1.0), (0.0, 2.0)], 16)
        assert np.all(points[:, 0] == 1.0)

    def test_rejects_reversed_bounds(self):
        with pytest.raises(ValueError):
            halton_points([(1.0, 0.0)], 4)

    def test_scaled(self):
        unit = halton_points([(0.0, 1.0), (-1.0, 1.0)], 8, seed=2)
        np.testing.assert_allclose(scaled_samples([(0.0, 1.0), (-1.0, 1.0)], 0.1, 8, seed=2), 0.1 * unit)


class TestPinnedCopies:
    def test_only_coordinates_whose_interval_contains_zero(self):
        points = np.array([[0.5, 2.5], [-0.5, 2.2]])
        copies = pinned_copies(points, [(-1.0, 1.0), (2.0, 3.0)])
        assert copies.tolist() == [[0.0, 2.2], [0.0, 2.5]]

    def test_pairs_and_all(self):
        points = np.array([[1.0, 2.0, 3.0]])
        copies = pinned_copies(points, [(-5.0, 5.0)] * 3)
        rows = {tuple(row) for row in copies.tolist()}
        assert (0.0, 2.0, 3.0) in rows
        assert (0.0, 0.0, 3.0) in rows
        assert (0.0, 0.0, 0.0) in rows
        assert len(rows) == 7

    def test_no_zero_coordinates(self):
        assert pinned_copies(np.ones((3, 2)), [(1.0, 2.0), (1.0, 2.0)]).shape == (0, 2)


class TestBoxSamples:
    def test_extra_points_come_last(self):
        samples = box_samples([(0.0, 1.0), (-1.0, 1.0)], 32, extra=[[0.25, -0.75]])
        assert samples[-1].tolist() == [0.25, -0.75]

    def test_pinned_rows_included(self):
        samples = box_samples([(0.0, 1.0), (-1.0, 1.0)], 32)
        assert len(samples) > 32
        assert np.any(np.all(samples == 0.0, axis=1))

    def test_without_pinning(self):
        assert box_samples([(0.0, 1.0)], 10, pin_zero=False).shape == (10, 1)


class TestSweep:
    def test_serial(self):
        assert sweep(abs, [-1, -2, 3]) == [1, 2, 3]

    def test_pool_keeps_item_order(self):
        assert sweep(abs, [-1, -2, 3], workers=2) == [1, 2, 3]

    def test_empty(self):
        assert sweep(abs, []) == []
