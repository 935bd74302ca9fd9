from __future__ import annotations

import math

import numpy as np
import pytest

from heatquant.errors import InvalidArgumentError
from heatquant.heatmap import GaussianConfig, encode_expected
from heatquant.predict import (
    AdditiveNoise,
    AnnotatorConfig,
    Blur,
    Composite,
    Perfect,
    PredictorConfig,
    annotate,
    annotate_batch,
    blur_kernel,
    flatten_stages,
    predict,
    predict_batch,
)
from heatquant.rng import RngStream

GT = (9.0, 15.0)
DIMS = (8, 8)


@pytest.mark.parametrize("kind", [Perfect(), AdditiveNoise(0.0), Blur(0.0), Composite((AdditiveNoise(0), Blur(0)))])
def test_identity_predictors(kind, rng):
    h = predict(GT, PredictorConfig(kind), DIMS, 4, rng)
    assert np.array_equal(h.values, encode_expected(GT, 4, DIMS).values)


def test_noise_changes_grid_and_stays_normalized(rng):
    h = predict(GT, PredictorConfig(AdditiveNoise(0.2)), DIMS, 4, rng)
    assert h.normalized and abs(h.values.sum() - 1) < 1e-12
    assert np.count_nonzero(h.values) > 4


def test_blur_spreads_mass(rng):
    h = predict(GT, PredictorConfig(Blur(1.0)), DIMS, 4, rng)
    assert abs(h.values.sum() - 1) < 1e-12 and np.count_nonzero(h.values) > 9
    assert np.unravel_index(h.values.argmax(), h.values.shape) == (4, 2)


def test_blur_kernel_normalized():
    k = blur_kernel(1.5)
    assert len(k) == 11 and math.isclose(k.sum(), 1.0) and np.array_equal(k, k[::-1])


def test_composite_flattens():
    kind = Composite((AdditiveNoise(0.1), Composite((Blur(1.0), Perfect()))))
    assert flatten_stages(kind) == [AdditiveNoise(0.1), Blur(1.0), Perfect()]


def test_predict_reproducible():
    cfg = PredictorConfig(Composite((AdditiveNoise(0.3), Blur(0.7))))
    a = predict_batch([GT, (4.0, 4.0)], cfg, DIMS, 4, RngStream(3, 1))
    b = predict_batch([GT, (4.0, 4.0)], cfg, DIMS, 4, RngStream(3, 1))
    assert np.array_equal(a, b)


@pytest.mark.parametrize("base", ["binary", "sampled", GaussianConfig(1.0)])
def test_other_bases_are_distributions(base, rng):
    h = predict(GT, PredictorConfig(Perfect(), base=base), DIMS, 4, rng)
    assert abs(h.values.sum() - 1) < 1e-9


@pytest.mark.parametrize(
    "make",
    [lambda: AdditiveNoise(-0.1), lambda: Blur(float("nan")), lambda: Composite((1,)), lambda: PredictorConfig(base="nope")],
)
def test_invalid_predictors(make):
    with pytest.raises(InvalidArgumentError):
        make()


class TestAnnotator:
    def test_integer_point_fixed(self, rng):
        pts = annotate_batch(np.tile([3.0, 7.0], (1000, 1)), AnnotatorConfig(), rng)
        assert np.all(pts == [3, 7])

    def test_deterministic_round(self, rng):
        assert annotate((3.25, 7.75), AnnotatorConfig("deterministic_round"), rng) == (3, 8)

    def test_unbiased_and_cell_probability(self):
        n = 1_000_000
        pts = annotate_batch(np.tile([3.25, 7.75], (n, 1)), AnnotatorConfig(), RngStream(21, 0))
        assert np.all(np.abs(pts.mean(axis=0) - [3.25, 7.75]) <= 0.0015)
        assert abs(np.mean((pts[:, 0] == 3) & (pts[:, 1] == 8)) - 0.5625) <= 0.0015

    def test_unknown_kind(self):
        with pytest.raises(InvalidArgumentError):
            AnnotatorConfig("mouse")
