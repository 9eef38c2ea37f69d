import numpy as np
import pytest

from weakloc.geometry import Box, InvalidBoxError, area, clip, iou, union_box

from conftest import lattice_box, random_box
from oracles import iou_raster


class TestIoU:
    def test_identity(self):
        b = Box(0, 0, 1, 1)
        assert iou(b, b) == 1.0

    def test_disjoint_touching_corner(self):
        assert iou(Box(0, 0, 0.5, 0.5), Box(0.5, 0.5, 1, 1)) == 0.0

    def test_partial_overlap(self):
        # intersection 0.1x0.1, union 2*0.04 - 0.01 = 0.07
        value = iou(Box(0, 0, 0.2, 0.2), Box(0.1, 0.1, 0.3, 0.3))
        assert value == pytest.approx(1 / 7, abs=1e-12)
        assert value == pytest.approx(iou_raster(Box(0, 0, 0.2, 0.2), Box(0.1, 0.1, 0.3, 0.3)), abs=2e-3)

    def test_shared_edge_is_zero(self):
        assert iou(Box(0, 0, 0.5, 1), Box(0.5, 0, 1, 1)) == 0.0

    def test_zero_area_prediction_scores_zero(self):
        assert iou(Box(0.3, 0.3, 0.3, 0.8), Box(0, 0, 1, 1)) == 0.0
        assert iou(Box(0.3, 0.3, 0.3, 0.3), Box(0.3, 0.3, 0.3, 0.3)) == 0.0

    def test_invalid_box_rejected(self):
        with pytest.raises(InvalidBoxError):
            iou(Box(0.5, 0, 0.2, 1), Box(0, 0, 1, 1))
        with pytest.raises(InvalidBoxError):
            iou(Box(0, 0, 1, 1), Box(0, 0.9, 1, 0.1))

    def test_symmetry_and_self(self, rng):
        for _ in range(200):
            a, b = random_box(rng), random_box(rng)
            assert iou(a, b) == pytest.approx(iou(b, a), abs=1e-15)
            assert iou(a, a) == pytest.approx(1.0, abs=1e-12)

    def test_matches_rasterization(self, rng):
        # coordinates on the oracle's 1/1000 lattice make the cell count exact,
        # so the tolerance is pure slack; boundary semantics have their own tests
        for _ in range(100):
            a = lattice_box(rng)
            b = lattice_box(rng)
            assert iou(a, b) == pytest.approx(iou_raster(a, b), abs=2e-3)


class TestUnionBox:
    def test_containment(self):
        assert union_box(Box(0, 0, 0.5, 0.5), Box(0.25, 0.25, 0.75, 0.75)) == Box(0, 0, 0.75, 0.75)

    def test_idempotent(self):
        b = Box(0.1, 0.2, 0.3, 0.4)
        assert union_box(b, b) == b

    def test_componentwise(self):
        a, b = Box(0.1, 0.2, 0.3, 0.4), Box(0.5, 0.1, 0.9, 0.3)
        expected = Box(
            min(a.x_min, b.x_min), min(a.y_min, b.y_min),
            max(a.x_max, b.x_max), max(a.y_max, b.y_max),
        )
        assert union_box(a, b) == expected == Box(0.1, 0.1, 0.9, 0.4)

    def test_invalid_rejected(self):
        with pytest.raises(InvalidBoxError):
            union_box(Box(0.9, 0, 0.1, 1), Box(0, 0, 1, 1))

    def test_algebraic_properties(self, rng):
        for _ in range(100):
            a, b, c = random_box(rng), random_box(rng), random_box(rng)
            assert union_box(a, b) == union_box(b, a)
            assert union_box(union_box(a, b), c) == union_box(a, union_box(b, c))
            u = union_box(a, b)
            assert u.x_min <= a.x_min and u.x_max >= a.x_max
            assert u.y_min <= b.y_min and u.y_max >= b.y_max


class TestClip:
    def test_clamps(self):
        assert clip(Box(-0.1, 0.2, 0.5, 1.3)) == Box(0, 0.2, 0.5, 1)

    def test_identity_inside_range(self):
        b = Box(0.2, 0.2, 0.8, 0.8)
        assert clip(b) == b

    def test_fully_outside_is_degenerate(self):
        out = clip(Box(1.1, 0.2, 1.4, 0.5))
        assert out.is_degenerate
        assert out == Box(1.0, 0.2, 1.0, 0.5)

    def test_inverted_extent_collapses(self):
        out = clip(Box(0.6, 0.2, 0.3, 0.8))
        assert out.is_degenerate
        assert out.x_min == out.x_max == 0.6

    def test_idempotent(self, rng):
        for _ in range(100):
            raw = Box(*rng.uniform(-0.5, 1.5, size=4))
            once = clip(raw)
            assert clip(once) == once


class TestArea:
    def test_unit(self):
        assert area(Box(0, 0, 1, 1)) == 1.0

    def test_zero_width(self):
        assert area(Box(0.25, 0.25, 0.25, 0.9)) == 0.0

    def test_rectangle(self):
        assert area(Box(0.1, 0.2, 0.4, 0.8)) == pytest.approx(0.18, abs=1e-12)
        # cross-check against a rasterized pixel count on a fine grid
        grid = 1000
        centers = (np.arange(grid) + 0.5) / grid
        inside = np.outer(
            (centers >= 0.2) & (centers < 0.8), (centers >= 0.1) & (centers < 0.4)
        )
        assert area(Box(0.1, 0.2, 0.4, 0.8)) == pytest.approx(inside.sum() / grid**2, abs=2e-3)

    def test_invalid_rejected(self):
        with pytest.raises(InvalidBoxError):
            area(Box(0.5, 0, 0.2, 1))


class TestBox:
    def test_serialization_order(self):
        assert Box(0.1, 0.2, 0.3, 0.4).as_tuple() == (0.1, 0.2, 0.3, 0.4)
        assert Box.from_seq(["0.1", "0.2", "0.3", "0.4"]) == Box(0.1, 0.2, 0.3, 0.4)

    def test_degenerate_flag(self):
        assert Box(0.5, 0.1, 0.5, 0.9).is_degenerate
        assert not Box(0.1, 0.1, 0.9, 0.9).is_degenerate
