"""Synthetic heatmap predictors and pixel-click annotators.

These stand in for a trained network. The noise forms (uniform additive,
Gaussian blur) are synthetic choices for controlled experiments, not a
model of any real network's errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.ndimage import convolve1d

from .errors import InvalidArgumentError, InvalidHeatmapError
from .heatmap import (
    GaussianConfig,
    HeatmapGrid,
    binary_heatmaps,
    expected_heatmaps,
    gaussian_heatmaps,
    sampled_heatmaps,
)
from .quantizer import Point, _as_coords, quantize_random_round, quantize_threshold
from .rng import RngStream


def _check_level(name, value):
    if not (math.isfinite(value) and value >= 0):
        raise InvalidArgumentError(f"{name} must be finite and >= 0, got {value}")


@dataclass(frozen=True)
class Perfect:
    pass


@dataclass(frozen=True)
class AdditiveNoise:
    """Adds i.i.d. U[0, level * max cell] to every cell, then renormalizes."""

    level: float

    def __post_init__(self):
        _check_level("noise level", self.level)


@dataclass(frozen=True)
class Blur:
    """Convolves with a truncated Gaussian (radius ceil(3 sigma)), then renormalizes."""

    sigma: float

    def __post_init__(self):
        _check_level("blur sigma", self.sigma)


@dataclass(frozen=True)
class Composite:
    stages: tuple

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        for st in self.stages:
            if not isinstance(st, (Perfect, AdditiveNoise, Blur, Composite)):
                raise InvalidArgumentError(f"not a predictor stage: {st!r}")


PredictorKind = Union[Perfect, AdditiveNoise, Blur, Composite]


@dataclass(frozen=True)
class PredictorConfig:
    """A base encoder followed by a heatmap-error model.

    ``base`` is ``"expected"``, ``"binary"``, ``"sampled"`` or a
    :class:`GaussianConfig`. Gaussian bases are scaled to unit sum so every
    predictor emits a distribution.
    """

    kind: PredictorKind = Perfect()
    base: Union[str, GaussianConfig] = "expected"
    threshold: float = 0.5
    center_mode: str = "quantized"

    def __post_init__(self):
        if not isinstance(self.base, GaussianConfig) and self.base not in ("expected", "binary", "sampled"):
            raise InvalidArgumentError(f"unknown base encoder {self.base!r}")


def flatten_stages(kind: PredictorKind) -> list:
    if isinstance(kind, Composite):
        return [leaf for st in kind.stages for leaf in flatten_stages(st)]
    return [kind]


def _renormalize(values: np.ndarray) -> np.ndarray:
    total = values.sum(axis=(1, 2), keepdims=True)
    if np.any(total <= 0):
        raise InvalidHeatmapError("predicted heatmap has zero mass")
    return values / total


def blur_kernel(sigma: float) -> np.ndarray:
    r = math.ceil(3 * sigma)
    x = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-(x**2) / (2 * sigma**2))
    return k / k.sum()


def add_noise(values: np.ndarray, level: float, uniforms: np.ndarray) -> np.ndarray:
    peak = values.max(axis=(1, 2), keepdims=True)
    return _renormalize(np.clip(values + uniforms * level * peak, 0.0, None))


def blur(values: np.ndarray, sigma: float) -> np.ndarray:
    k = blur_kernel(sigma)
    out = convolve1d(values, k, axis=1, mode="constant")
    out = convolve1d(out, k, axis=2, mode="constant")
    return _renormalize(np.clip(out, 0.0, None))


def apply_stages(values: np.ndarray, kind: PredictorKind, draw: Callable[[tuple], np.ndarray]) -> np.ndarray:
    """Run the error model over an ``(N, H, W)`` stack.

    ``draw(shape)`` supplies U[0, 1) noise for each additive stage in order.
    Zero-strength stages are skipped so they leave the input bit-identical.
    """
    for st in flatten_stages(kind):
        if isinstance(st, AdditiveNoise) and st.level > 0:
            values = add_noise(values, st.level, draw(values.shape))
        elif isinstance(st, Blur) and st.sigma > 0:
            values = blur(values, st.sigma)
    return values


def base_heatmaps(points, cfg: PredictorConfig, dims, s, rng: RngStream | None = None) -> np.ndarray:
    if isinstance(cfg.base, GaussianConfig):
        return _renormalize(gaussian_heatmaps(points, s, dims, cfg.base, cfg.threshold, cfg.center_mode))
    if cfg.base == "expected":
        return expected_heatmaps(points, s, dims)
    if cfg.base == "binary":
        return binary_heatmaps(points, s, dims, cfg.threshold)
    if rng is None:
        raise InvalidArgumentError("the sampled base encoder needs an rng")
    return sampled_heatmaps(points, s, dims, rng)


def predict_batch(points, cfg: PredictorConfig, dims, s, rng: RngStream) -> np.ndarray:
    values = base_heatmaps(points, cfg, dims, s, rng)
    return apply_stages(values, cfg.kind, rng.uniform)


def predict(gt, cfg: PredictorConfig, dims, s, rng: RngStream) -> HeatmapGrid:
    values = predict_batch([gt], cfg, dims, s, rng)[0]
    return HeatmapGrid(values, s, normalized=True)


@dataclass(frozen=True)
class AnnotatorConfig:
    """``"unbiased_stochastic"`` clicks a neighboring pixel with bilinear
    probabilities; ``"deterministic_round"`` clicks the nearest pixel."""

    kind: str = "unbiased_stochastic"

    def __post_init__(self):
        if self.kind not in ("unbiased_stochastic", "deterministic_round"):
            raise InvalidArgumentError(f"unknown annotator {self.kind!r}")


def annotate_batch(points, cfg: AnnotatorConfig, rng: RngStream) -> np.ndarray:
    pts = _as_coords(points)
    if cfg.kind == "unbiased_stochastic":
        return quantize_random_round(pts, 1.0, rng).astype(np.float64)
    return quantize_threshold(pts, 1.0, 0.5).astype(np.float64)


def annotate(true_point, cfg: AnnotatorConfig, rng: RngStream) -> Point:
    x, y = annotate_batch(np.asarray(true_point, dtype=np.float64)[None], cfg, rng)[0]
    return Point(float(x), float(y))
