import numpy as np
import pytest

from weakloc.geometry import Box, FULL_IMAGE
from weakloc.pseudogen import (
    NoForegroundError,
    binarize,
    channel_mean,
    foreground_box,
    generate_pseudo_box,
    mask_out,
    read_pseudo_labels,
    write_pseudo_labels,
)

from oracles import pseudo_box_oracle


class StubExtractor:
    """Returns queued attention grids (as 1-channel stacks), ignoring pixels."""

    def __init__(self, *grids):
        self.grids = [np.asarray(g, dtype=np.float64)[None] for g in grids]
        self.calls = 0

    def __call__(self, image):
        grid = self.grids[min(self.calls, len(self.grids) - 1)]
        self.calls += 1
        return grid


class TestChannelMean:
    def test_two_channels(self):
        stack = np.array([[[0, 1], [2, 3]], [[4, 3], [2, 1]]], dtype=float)
        np.testing.assert_array_equal(channel_mean(stack), np.full((2, 2), 2.0))

    def test_single_channel_identity(self):
        grid = np.arange(12, dtype=float).reshape(3, 4)
        np.testing.assert_array_equal(channel_mean(grid[None]), grid)

    def test_matches_loop_oracle(self, rng):
        stack = rng.normal(size=(3, 5, 5))
        out = channel_mean(stack)
        for r in range(5):
            for c in range(5):
                expected = sum(stack[ch, r, c] for ch in range(3)) / 3
                assert out[r, c] == pytest.approx(expected, abs=1e-15)

    def test_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            channel_mean(np.zeros((4, 4)))
        with pytest.raises(ValueError):
            channel_mean(np.array([[[np.nan]]]))


class TestBinarize:
    def test_thresholding(self):
        attn = np.array([[0.0, 1.0], [0.5, 0.25]])
        mask = binarize(attn, 0.7)
        np.testing.assert_array_equal(mask, [[False, True], [False, False]])

    def test_constant_map_is_empty(self):
        assert not binarize(np.full((3, 3), 2.5), 0.5).any()

    def test_matches_per_cell_oracle(self, rng):
        attn = rng.random((8, 8))
        mask = binarize(attn, 0.5)
        lo, hi = attn.min(), attn.max()
        for r in range(8):
            for c in range(8):
                assert mask[r, c] == ((attn[r, c] - lo) / (hi - lo) > 0.5)

    def test_foreground_count_non_increasing_in_delta(self, rng):
        attn = rng.random((6, 6))
        counts = [binarize(attn, d).sum() for d in (0.1, 0.3, 0.5, 0.7, 0.9)]
        assert all(a >= b for a, b in zip(counts, counts[1:]))

    def test_delta_range_enforced(self):
        with pytest.raises(ValueError):
            binarize(np.zeros((2, 2)), 0.0)
        with pytest.raises(ValueError):
            binarize(np.zeros((2, 2)), 1.0)


class TestForegroundBox:
    def test_single_cell(self):
        mask = np.zeros((4, 4), dtype=bool)
        mask[1, 2] = True
        assert foreground_box(mask) == Box(0.5, 0.25, 0.75, 0.5)

    def test_full_grid(self):
        assert foreground_box(np.ones((5, 3), dtype=bool)) == Box(0, 0, 1, 1)

    def test_scattered_cells(self):
        mask = np.zeros((4, 4), dtype=bool)
        mask[0, 3] = True
        mask[2, 1] = True
        assert foreground_box(mask) == Box(0.25, 0.0, 1.0, 0.75)

    def test_empty_mask_raises(self):
        with pytest.raises(NoForegroundError):
            foreground_box(np.zeros((4, 4), dtype=bool))

    def test_matches_scan_oracle(self, rng):
        for _ in range(50):
            mask = rng.random((6, 9)) < 0.3
            if not mask.any():
                continue
            rows = [r for r in range(6) if mask[r].any()]
            cols = [c for c in range(9) if mask[:, c].any()]
            expected = Box(min(cols) / 9, min(rows) / 6, (max(cols) + 1) / 9, (max(rows) + 1) / 6)
            assert foreground_box(mask) == expected


class TestMaskOut:
    def test_full_box_zeroes_everything(self):
        img = np.arange(4 * 4 * 3, dtype=np.uint8).reshape(4, 4, 3) + 1
        out = mask_out(img, Box(0, 0, 1, 1))
        assert (out == 0).all()
        assert (img != 0).all()  # input untouched

    def test_degenerate_box_returns_unchanged(self):
        img = np.ones((4, 4, 3), dtype=np.uint8)
        with pytest.warns(UserWarning):
            out = mask_out(img, Box(0.5, 0.2, 0.5, 0.8))
        np.testing.assert_array_equal(out, img)

    def test_quadrant(self):
        img = np.ones((4, 4, 3), dtype=np.uint8)
        out = mask_out(img, Box(0, 0, 0.5, 0.5))
        assert (out[:2, :2] == 0).all()
        assert (out[2:, :] == 1).all() and (out[:2, 2:] == 1).all()

    def test_matches_center_in_box_oracle(self, rng):
        img = rng.integers(1, 255, size=(7, 5, 3)).astype(np.uint8)
        box = Box(0.13, 0.21, 0.77, 0.69)
        out = mask_out(img, box)
        for r in range(7):
            for c in range(5):
                cy, cx = (r + 0.5) / 7, (c + 0.5) / 5
                inside = box.x_min <= cx < box.x_max and box.y_min <= cy < box.y_max
                assert (out[r, c] == 0).all() if inside else (out[r, c] == img[r, c]).all()

    def test_idempotent(self, rng):
        img = rng.integers(0, 255, size=(8, 8, 3)).astype(np.uint8)
        box = Box(0.2, 0.3, 0.8, 0.9)
        once = mask_out(img, box)
        np.testing.assert_array_equal(mask_out(once, box), once)


def _random_attention(rng, size):
    """Mostly informative grids, sometimes constant to hit the fallbacks."""
    roll = rng.random()
    if roll < 0.1:
        return np.full((size, size), float(rng.random()))
    return rng.random((size, size))


class TestGeneratePseudoBox:
    dummy = np.zeros((16, 16, 3), dtype=np.uint8)

    def test_raw_pass_empty_falls_back_to_full_image(self):
        stub = StubExtractor(np.ones((4, 4)))  # constant -> empty mask
        label = generate_pseudo_box(self.dummy, stub, 0.6)
        assert label.fallback_used
        assert label.merged == FULL_IMAGE
        assert stub.calls == 1  # second pass skipped

    def test_masked_pass_empty_keeps_raw_region(self):
        raw = np.zeros((4, 4))
        raw[0, 0] = 1.0  # top-left cell only
        stub = StubExtractor(raw, np.full((4, 4), 3.0))
        label = generate_pseudo_box(self.dummy, stub, 0.6)
        assert label.fallback_used
        assert label.merged == label.raw_pass == Box(0, 0, 0.25, 0.25)

    def test_identical_passes_merge_to_same_region(self):
        grid = np.zeros((4, 4))
        grid[1:3, 1:3] = 1.0
        stub = StubExtractor(grid, grid)
        label = generate_pseudo_box(self.dummy, stub, 0.6)
        assert not label.fallback_used
        assert label.merged == label.raw_pass == Box(0.25, 0.25, 0.75, 0.75)

    def test_disjoint_passes_merge_to_union(self):
        raw = np.zeros((4, 4))
        raw[0:2, 0:2] = 1.0
        second = np.zeros((4, 4))
        second[2:4, 2:4] = 1.0
        stub = StubExtractor(raw, second)
        label = generate_pseudo_box(self.dummy, stub, 0.6)
        assert label.merged == Box(0, 0, 1, 1)
        assert label.raw_pass == Box(0, 0, 0.5, 0.5)
        assert label.masked_pass == Box(0.5, 0.5, 1, 1)

    def test_merged_contains_both_passes(self, rng):
        for _ in range(50):
            size = int(rng.integers(4, 17))
            stub = StubExtractor(_random_attention(rng, size), _random_attention(rng, size))
            delta = float(rng.choice([0.5, 0.6, 0.7, 0.8]))
            label = generate_pseudo_box(self.dummy, stub, delta)
            for region in (label.raw_pass, label.masked_pass):
                assert label.merged.x_min <= region.x_min
                assert label.merged.y_min <= region.y_min
                assert label.merged.x_max >= region.x_max
                assert label.merged.y_max >= region.y_max

    def test_matches_straight_line_oracle(self, rng):
        for _ in range(100):
            size = int(rng.integers(4, 17))
            attn_raw = _random_attention(rng, size)
            attn_masked = _random_attention(rng, size)
            delta = float(rng.choice([0.5, 0.6, 0.7, 0.8]))
            stub = StubExtractor(attn_raw, attn_masked)
            label = generate_pseudo_box(self.dummy, stub, delta)
            merged, raw, masked, fallback = pseudo_box_oracle(attn_raw, attn_masked, delta)
            assert label.merged.as_tuple() == merged
            assert label.raw_pass.as_tuple() == raw
            assert label.masked_pass.as_tuple() == masked
            assert label.fallback_used == fallback


class TestDumpFormat:
    def test_roundtrip_and_precision(self, tmp_path):
        rows = [
            ("img_000", Box(0.0, 0.125, 0.6666667, 1.0), False),
            ("img_001", Box(0.1, 0.2, 0.3, 0.4), True),
        ]
        path = tmp_path / "pseudo.txt"
        write_pseudo_labels(path, rows)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "img_000,0.000000,0.125000,0.666667,1.000000,0"
        assert lines[1].endswith(",1")
        for line in lines:
            for coord in line.split(",")[1:5]:
                assert len(coord.split(".")[1]) >= 6
        loaded = read_pseudo_labels(path)
        assert loaded[0][0] == "img_000"
        assert loaded[1][2] is True
        assert loaded[1][1] == Box(0.1, 0.2, 0.3, 0.4)
