from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from heatquant.errors import InvalidArgumentError
from heatquant.quantizer import decompose, quantize_random_round, quantize_threshold, threshold_bias
from heatquant.rng import RngStream

coords = st.floats(0, 1e4, allow_nan=False)
strides = st.floats(1, 64, allow_nan=False)
thresholds = st.floats(0, 1)


@pytest.mark.parametrize("x, base, frac", [(9, 2, 0.25), (8, 2, 0.0), (10, 2, 0.5)])
def test_decompose_examples(x, base, frac):
    d = decompose(x, 4)
    assert d.base == base and d.frac == frac


def test_decompose_snaps_fraction_near_one():
    d = decompose(4 * (3 - 1e-14), 4)
    assert d.base == 3 and d.frac == 0.0


@given(coords, strides)
def test_decompose_reconstructs(x, s):
    d = decompose(x, s)
    assert 0 <= d.frac < 1
    assert math.isclose(s * (d.base + d.frac), x, rel_tol=1e-9, abs_tol=1e-9)


@pytest.mark.parametrize("x, t, expected", [(10, 0.5, 3), (9, 1.0, 2), (9, 0.0, 3)])
def test_quantize_threshold_examples(x, t, expected):
    assert quantize_threshold(x, 4, t) == expected


@given(coords, strides, thresholds)
def test_threshold_result_is_floor_or_ceil(x, s, t):
    d = decompose(x, s)
    assert quantize_threshold(x, s, t) == d.base + (d.frac >= t)


def test_threshold_broadcasts():
    q = quantize_threshold(np.array([[9.0, 10.0], [8.0, 11.0]]), 4, 0.5)
    assert q.tolist() == [[2, 3], [2, 3]]


def test_exact_multiple_random_round_is_deterministic(rng):
    q = quantize_random_round(np.full(10_000, 8.0), 4, rng)
    assert np.all(q == 2)


def test_random_round_mean_and_probability():
    n = 1_000_000
    q = quantize_random_round(np.full(n, 9.0), 4, RngStream(5, 0))
    assert abs(q.mean() - 2.25) <= 3 * math.sqrt(0.25 * 0.75 / n)
    q = quantize_random_round(np.full(n, 10.0), 4, RngStream(5, 1))
    assert abs((q == 3).mean() - 0.5) <= 0.002


@given(coords, strides, st.integers(0, 2**32))
def test_random_round_stays_on_neighbors(x, s, seed):
    d = decompose(x, s)
    q = quantize_random_round(np.full(64, x), s, RngStream(seed, 0))
    assert set(np.unique(q)).issubset({d.base, d.base + 1})


def test_random_round_reproducible():
    a = quantize_random_round(np.linspace(0, 50, 101), 3, RngStream(9, 2))
    b = quantize_random_round(np.linspace(0, 50, 101), 3, RngStream(9, 2))
    assert np.array_equal(a, b)


@pytest.mark.parametrize("t, bias", [(0.5, 0.0), (1.0, -0.5), (0.0, 0.5)])
def test_threshold_bias(t, bias):
    assert threshold_bias(t) == bias


@pytest.mark.parametrize("s", [0.5, 0, -1, float("nan"), float("inf")])
def test_rejects_bad_stride(s):
    with pytest.raises(InvalidArgumentError):
        decompose(3.0, s)


@pytest.mark.parametrize("t", [-0.1, 1.1, float("nan")])
def test_rejects_bad_threshold(t):
    with pytest.raises(InvalidArgumentError):
        quantize_threshold(3.0, 2, t)


def test_rejects_nonfinite_coordinate():
    with pytest.raises(InvalidArgumentError):
        decompose(float("nan"), 2)
