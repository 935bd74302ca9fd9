from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from heatquant.decode import (
    ActivationSet,
    FourNeighborOfMax,
    NineNeighborUnion,
    TopK,
    activation_cells,
    decode_argmax,
    decode_argmax_bias_corrected,
    decode_expectation,
    decode_quarter_shift,
    expectation_decode,
    quarter_shift_decode,
    select_activation_set,
    topk_indices,
)
from heatquant.errors import DegenerateSetError, InvalidArgumentError, InvalidHeatmapError
from heatquant.heatmap import HeatmapGrid, encode_binary, encode_expected, expected_heatmaps


def grid(cells, shape=(8, 8), s=4):
    v = np.zeros(shape)
    for (c, r), w in cells.items():
        v[r, c] = w
    return HeatmapGrid(v, s)


ONE_HOT = grid({(2, 4): 1.0})
EXPECTED = encode_expected((9, 15), 4, (8, 8))


class TestArgmax:
    def test_one_hot(self):
        assert decode_argmax(ONE_HOT) == (8, 16)

    def test_expected_grid(self):
        assert decode_argmax(EXPECTED) == (8, 16)

    def test_uniform_ties_to_origin(self):
        assert decode_argmax(HeatmapGrid(np.ones((5, 5)), 4)) == (0, 0)

    @pytest.mark.parametrize("t, expected", [(1.0, (10, 18)), (0.0, (6, 14)), (0.5, (8, 16))])
    def test_bias_corrected(self, t, expected):
        assert decode_argmax_bias_corrected(ONE_HOT, t) == expected

    def test_bias_corrected_bad_threshold(self):
        with pytest.raises(InvalidArgumentError):
            decode_argmax_bias_corrected(ONE_HOT, 2.0)


class TestQuarterShift:
    def test_shift_in_x(self):
        assert decode_quarter_shift(grid({(2, 4): 0.6, (3, 4): 0.4})) == (9, 16)

    def test_shift_in_y(self):
        assert decode_quarter_shift(grid({(2, 4): 0.6, (2, 3): 0.4})) == (8, 15)

    def test_one_hot_uses_tie_broken_second(self):
        # second max is the first zero cell in row-major order, (0, 0)
        assert decode_quarter_shift(ONE_HOT) == (7, 15)

    @given(st.integers(1, 6), st.integers(1, 6), st.sampled_from([(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1)]))
    def test_equals_top2_renormalized(self, c, r, d):
        g = grid({(c, r): 0.6, (c + d[0], r + d[1]): 0.2})
        a = decode_quarter_shift(g)
        b = decode_expectation(g, select_activation_set(g, TopK(2)))
        assert np.allclose(a, b, atol=1e-12, rtol=0)


class TestTopK:
    def test_spec_set(self):
        a = select_activation_set(EXPECTED, TopK(4))
        assert a.points == ((2, 4), (2, 3), (3, 4), (3, 3))
        assert a.weights.tolist() == [0.5625, 0.1875, 0.1875, 0.0625]

    def test_one_hot_top1(self):
        a = select_activation_set(ONE_HOT, TopK(1))
        assert a.points == ((2, 4),) and a.weights.tolist() == [1.0]

    def test_k_out_of_range(self):
        with pytest.raises(InvalidArgumentError):
            select_activation_set(ONE_HOT, TopK(65))
        with pytest.raises(InvalidArgumentError):
            TopK(0)

    @given(arrays(np.float64, (3, 4, 5), elements=st.integers(0, 3).map(float)), st.integers(1, 20))
    def test_matches_stable_full_sort(self, values, k):
        ref = np.argsort(-values.reshape(3, -1), axis=1, kind="stable")[:, :k]
        assert np.array_equal(topk_indices(values, k), ref)

    @pytest.mark.parametrize("k", [3, 18, 40])
    def test_many_ties_with_neg_inf(self, k):
        v = np.random.default_rng(0).integers(0, 3, (10, 5, 8)).astype(float)
        v[v == 0] = -np.inf
        ref = np.argsort(-v.reshape(10, -1), axis=1, kind="stable")[:, :k]
        assert np.array_equal(topk_indices(v, k), ref)

    def test_rejects_nan(self):
        v = np.zeros((1, 3, 3))
        v[0, 1, 1] = np.nan
        with pytest.raises(InvalidHeatmapError):
            topk_indices(v, 2)


class TestNeighborhoods:
    def test_nine_neighbor_corner(self):
        a = select_activation_set(grid({(0, 0): 1.0, (1, 1): 0.2}), NineNeighborUnion())
        assert sorted(a.points) == [(0, 0), (0, 1), (1, 0), (1, 1)]

    def test_nine_neighbor_interior(self):
        assert len(select_activation_set(EXPECTED, NineNeighborUnion()).points) == 9

    def test_four_neighbor_picks_heaviest_block(self):
        a = select_activation_set(EXPECTED, FourNeighborOfMax())
        assert set(a.points) == {(2, 3), (3, 3), (2, 4), (3, 4)}

    def test_four_neighbor_at_corner(self):
        a = select_activation_set(grid({(7, 7): 1.0}), FourNeighborOfMax())
        assert set(a.points) == {(6, 6), (7, 6), (6, 7), (7, 7)}

    def test_four_neighbor_tie_row_major(self):
        a = select_activation_set(ONE_HOT, FourNeighborOfMax())
        assert set(a.points) == {(1, 3), (2, 3), (1, 4), (2, 4)}


class TestExpectation:
    def test_topk4_reconstructs(self):
        p = decode_expectation(EXPECTED, select_activation_set(EXPECTED, TopK(4)))
        assert abs(p.x - 9) <= 1e-12 and abs(p.y - 15) <= 1e-12

    def test_topk2(self):
        p = decode_expectation(EXPECTED, select_activation_set(EXPECTED, TopK(2)))
        assert np.allclose(p, (8, 15), atol=1e-12)

    def test_singleton(self):
        assert decode_expectation(EXPECTED, ActivationSet(((2, 4),), [0.3])) == (8, 16)

    def test_zero_weights(self):
        with pytest.raises(DegenerateSetError):
            decode_expectation(EXPECTED, ActivationSet(((0, 0),), [0.0]))

    def test_unnormalized_warns(self):
        aset = select_activation_set(EXPECTED, TopK(2))
        with pytest.warns(UserWarning):
            decode_expectation(EXPECTED, aset, renormalize=False)

    def test_normalized_no_warning(self):
        aset = select_activation_set(EXPECTED, TopK(4))
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assert np.allclose(decode_expectation(EXPECTED, aset, renormalize=False), (9, 15))

    def test_point_outside_grid(self):
        with pytest.raises(InvalidArgumentError):
            decode_expectation(EXPECTED, ActivationSet(((8, 0),), [1.0]))

    @pytest.mark.parametrize(
        "points, weights",
        [((), []), (((0, 0), (0, 0)), [1, 1]), (((0, 0),), [-1.0]), (((0, 0),), [1, 2])],
    )
    def test_activation_set_validation(self, points, weights):
        with pytest.raises(InvalidArgumentError):
            ActivationSet(points, weights)

    @given(st.floats(4, 23.99), st.floats(4, 23.99), st.sampled_from([TopK(4), TopK(9), FourNeighborOfMax(), NineNeighborUnion()]))
    def test_lossless_for_full_support(self, x, y, strategy):
        v = expected_heatmaps([[x, y]], 4, (8, 8))
        assert np.allclose(expectation_decode(v, 4, strategy), [[x, y]], atol=1e-9, rtol=0)

    def test_batch_matches_single(self):
        pts = np.array([[5.0, 7.5], [9.0, 15.0], [20.2, 3.3]])
        v = expected_heatmaps(pts, 4, (8, 8)) + 0.01
        batch = expectation_decode(v, 4, TopK(3))
        for vi, b in zip(v, batch):
            h = HeatmapGrid(vi, 4)
            assert np.allclose(decode_expectation(h, select_activation_set(h, TopK(3))), b, atol=1e-12)
        assert np.array_equal(quarter_shift_decode(v, 4)[1], np.array(decode_quarter_shift(HeatmapGrid(v[1], 4))))

    def test_binary_decodes_to_quantized_cell(self):
        g = encode_binary((9, 15), 4, (8, 8))
        cells, ok = activation_cells(g.values[None], TopK(1))
        assert cells[0, 0].tolist() == [2, 4] and ok.all()
