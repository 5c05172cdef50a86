import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dctcrop.transform import (
    AC_FLAT_INDICES,
    ZIGZAG_POSITIONS,
    DctBlock,
    block_dct,
    block_decompose,
    dct_1d,
    dct_2d_block,
    idct_1d,
)

from oracles import naive_dct_1d, naive_dct_2d


class TestDct1d:
    def test_constant_signal_has_only_dc(self):
        c = dct_1d(np.ones(8))
        assert c[0] == pytest.approx(np.sqrt(8), abs=1e-12)
        assert np.abs(c[1:]).max() < 1e-12

    def test_impulse_at_zero(self):
        f = np.zeros(8)
        f[0] = 1.0
        c = dct_1d(f)
        for u in range(8):
            a = np.sqrt(1 / 8) if u == 0 else np.sqrt(2 / 8)
            assert c[u] == pytest.approx(a * np.cos(np.pi * u / 16), abs=1e-12)

    def test_matches_naive_evaluation_on_random_signals(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            f = rng.uniform(-200, 200, size=8)
            assert np.abs(dct_1d(f) - naive_dct_1d(f)).max() < 1e-12

    def test_rejects_empty_signal(self):
        with pytest.raises(ValueError):
            dct_1d([])

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            dct_1d([1.0, np.nan, 0.0])

    def test_non_power_of_two_length(self):
        f = np.arange(5.0)
        assert np.abs(dct_1d(f) - naive_dct_1d(f)).max() < 1e-12

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=16))
    def test_linearity(self, values):
        f = np.asarray(values)
        g = np.roll(f, 1)
        lhs = dct_1d(2.5 * f + 0.5 * g)
        rhs = 2.5 * dct_1d(f) + 0.5 * dct_1d(g)
        assert np.abs(lhs - rhs).max() < 1e-10

    def test_parseval_1d(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            f = rng.normal(scale=50, size=8)
            c = dct_1d(f)
            assert np.sum(c * c) == pytest.approx(np.sum(f * f), rel=1e-12)


class TestIdct1d:
    def test_dc_only_gives_constant(self):
        c = np.zeros(8)
        c[0] = np.sqrt(8)
        assert np.abs(idct_1d(c) - 1.0).max() < 1e-12

    def test_zero_coeffs(self):
        assert np.abs(idct_1d(np.zeros(8))).max() == 0.0

    def test_roundtrip_on_random_signals(self):
        rng = np.random.default_rng(3)
        worst = 0.0
        for _ in range(1000):
            f = rng.uniform(-255, 255, size=8)
            worst = max(worst, np.abs(idct_1d(dct_1d(f)) - f).max())
        assert worst < 1e-10

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            idct_1d([])


class TestDct2dBlock:
    def test_constant_block_dc(self):
        c = dct_2d_block(np.full((8, 8), 128.0))
        assert c[0, 0] == pytest.approx(1024.0, abs=1e-9)
        ac = c.copy()
        ac[0, 0] = 0.0
        assert np.abs(ac).max() < 1e-9

    def test_matches_naive_on_random_blocks(self):
        rng = np.random.default_rng(5)
        for _ in range(1000):
            b = rng.uniform(0, 255, size=(8, 8))
            assert np.abs(dct_2d_block(b) - naive_dct_2d(b)).max() < 1e-10

    def test_parseval_2d(self):
        rng = np.random.default_rng(9)
        for _ in range(200):
            b = rng.uniform(-128, 128, size=(8, 8))
            c = dct_2d_block(b)
            assert np.sum(c * c) == pytest.approx(np.sum(b * b), rel=1e-9)

    def test_separability_row_col_order(self):
        rng = np.random.default_rng(13)
        b = rng.normal(size=(8, 8))
        rows_first = np.stack([dct_1d(r) for r in b])
        rows_then_cols = np.stack([dct_1d(c) for c in rows_first.T]).T
        cols_first = np.stack([dct_1d(c) for c in b.T]).T
        cols_then_rows = np.stack([dct_1d(r) for r in cols_first])
        assert np.abs(rows_then_cols - cols_then_rows).max() < 1e-10
        assert np.abs(dct_2d_block(b) - rows_then_cols).max() < 1e-10

    def test_rejects_wrong_shape(self):
        with pytest.raises(ValueError):
            dct_2d_block(np.zeros((4, 4)))


class TestBlockDecompose:
    def test_exact_tiling_positions(self):
        rng = np.random.default_rng(1)
        plane = rng.uniform(0, 255, size=(16, 16))
        blocks = block_decompose(plane)
        assert [b.position for b in blocks] == [(0, 0), (0, 1), (1, 0), (1, 1)]
        for b in blocks:
            r, c = b.position
            tile = plane[8 * r : 8 * r + 8, 8 * c : 8 * c + 8]
            assert np.abs(b.coefficients - dct_2d_block(tile)).max() == 0.0

    def test_trailing_pixels_discarded(self):
        plane = np.zeros((20, 20))
        assert len(block_decompose(plane)) == 4

    def test_rejects_small_plane(self):
        with pytest.raises(ValueError):
            block_decompose(np.zeros((7, 16)))

    def test_array_path_agrees_with_dataclass_path(self):
        rng = np.random.default_rng(2)
        plane = rng.uniform(0, 255, size=(24, 40))
        arr = block_dct(plane)
        blocks = block_decompose(plane)
        assert arr.shape == (3, 5, 8, 8)
        for b in blocks:
            assert np.array_equal(arr[b.position], b.coefficients)


class TestZigzag:
    def test_first_ten_positions_follow_jpeg_order(self):
        assert ZIGZAG_POSITIONS[:10] == (
            (0, 0),
            (0, 1),
            (1, 0),
            (2, 0),
            (1, 1),
            (0, 2),
            (0, 3),
            (1, 2),
            (2, 1),
            (3, 0),
        )

    def test_covers_all_positions_once(self):
        assert sorted(ZIGZAG_POSITIONS) == [(r, c) for r in range(8) for c in range(8)]

    def test_ac_indices_exclude_dc(self):
        assert len(AC_FLAT_INDICES) == 63
        assert 0 not in AC_FLAT_INDICES


class TestDctBlockType:
    def test_rejects_bad_coefficients(self):
        with pytest.raises(ValueError):
            DctBlock(coefficients=np.zeros((4, 4)), position=(0, 0))
