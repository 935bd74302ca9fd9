"""Landmark evaluation metrics and loss evaluators."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np
from scipy.special import log_softmax

from .errors import EmptyEvaluationError, InvalidArgumentError, InvalidNormalizationError, ShapeError
from .heatmap import HeatmapGrid

IndexGroup = Union[int, Sequence[int]]


@dataclass(frozen=True)
class InterOcular:
    """Distance between two outer eye-corner landmarks."""

    left: int
    right: int


@dataclass(frozen=True)
class InterPupil:
    """Distance between eye centers.

    Each side is a landmark index or a group of indices whose mean is the
    eye center.
    """

    left: IndexGroup
    right: IndexGroup


@dataclass(frozen=True)
class BBoxSqrt:
    width: float
    height: float


@dataclass(frozen=True)
class FixedDistance:
    distance: float


NormalizationKind = Union[InterOcular, InterPupil, BBoxSqrt, FixedDistance]


@dataclass(frozen=True, eq=False)
class LandmarkSetPair:
    predictions: np.ndarray
    ground_truth: np.ndarray
    visible: np.ndarray | None = None

    def __post_init__(self):
        pred = np.asarray(self.predictions, dtype=np.float64).reshape(-1, 2)
        gt = np.asarray(self.ground_truth, dtype=np.float64).reshape(-1, 2)
        if pred.shape != gt.shape:
            raise ShapeError(f"{len(pred)} predictions vs {len(gt)} ground-truth landmarks")
        if len(gt) == 0:
            raise EmptyEvaluationError("no landmarks")
        vis = np.ones(len(gt), dtype=bool) if self.visible is None else np.asarray(self.visible, dtype=bool)
        if vis.shape != (len(gt),):
            raise ShapeError("visibility mask length differs from landmark count")
        object.__setattr__(self, "predictions", pred)
        object.__setattr__(self, "ground_truth", gt)
        object.__setattr__(self, "visible", vis)

    def errors(self) -> np.ndarray:
        """Euclidean error of each visible landmark."""
        if not self.visible.any():
            raise EmptyEvaluationError("no visible landmarks")
        d = self.predictions - self.ground_truth
        return np.hypot(d[:, 0], d[:, 1])[self.visible]


def _center(gt: np.ndarray, group: IndexGroup) -> np.ndarray:
    idx = np.atleast_1d(np.asarray(group, dtype=np.int64))
    if idx.size == 0 or idx.min() < -len(gt) or idx.max() >= len(gt):
        raise InvalidNormalizationError(f"landmark index {group!r} out of range for K={len(gt)}")
    return gt[idx].mean(axis=0)


def normalization_distance(norm: NormalizationKind, ground_truth) -> float:
    gt = np.asarray(ground_truth, dtype=np.float64).reshape(-1, 2)
    if isinstance(norm, (InterOcular, InterPupil)):
        a, b = _center(gt, norm.left), _center(gt, norm.right)
        d = float(np.hypot(*(a - b)))
    elif isinstance(norm, BBoxSqrt):
        if norm.width < 0 or norm.height < 0:
            raise InvalidNormalizationError("bounding box sides must be non-negative")
        d = math.sqrt(norm.width * norm.height)
    elif isinstance(norm, FixedDistance):
        d = float(norm.distance)
    else:
        raise InvalidNormalizationError(f"unknown normalization {norm!r}")
    if not (math.isfinite(d) and d > 0):
        raise InvalidNormalizationError(f"normalization distance must be positive, got {d}")
    return d


def nme(pair: LandmarkSetPair, norm: NormalizationKind) -> float:
    """Normalized mean error over visible landmarks, in percent."""
    d = normalization_distance(norm, pair.ground_truth)
    return float(100.0 * np.mean(pair.errors() / d))


def pck(pair: LandmarkSetPair, length: float, alpha: float) -> float:
    """Fraction of visible landmarks within ``alpha * length`` pixels (inclusive)."""
    if not (math.isfinite(length) and length > 0):
        raise InvalidNormalizationError(f"PCK length must be positive, got {length}")
    if not 0 <= alpha <= 1:
        raise InvalidArgumentError(f"alpha must lie in [0, 1], got {alpha}")
    return float(np.mean(pair.errors() <= alpha * length))


def coordinate_loss(pair: LandmarkSetPair, kind: str = "mse") -> float:
    d = pair.predictions - pair.ground_truth
    if kind == "mse":
        return float(np.mean(np.sum(d**2, axis=1)))
    if kind == "mae":
        return float(np.mean(np.sum(np.abs(d), axis=1)))
    raise InvalidArgumentError(f"unknown coordinate loss {kind!r}")


def heatmap_loss(pred: HeatmapGrid, gt: HeatmapGrid, kind: str = "mse") -> float:
    """Pixel-wise MSE, or cross-entropy of ``gt`` against softmax of the raw ``pred``.

    ``pred`` values are treated as logits for the cross-entropy; a
    :class:`HeatmapGrid` cannot hold negative logits, so pass raw arrays to
    :func:`softmax_cross_entropy` when needed.
    """
    if pred.values.shape != gt.values.shape:
        raise ShapeError(f"heatmap shapes differ: {pred.values.shape} vs {gt.values.shape}")
    if kind == "mse":
        return float(np.mean((pred.values - gt.values) ** 2))
    if kind == "cross_entropy":
        return softmax_cross_entropy(pred.values, gt.values)
    raise InvalidArgumentError(f"unknown heatmap loss {kind!r}")


def softmax_cross_entropy(logits, target) -> float:
    logits = np.asarray(logits, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if logits.shape != target.shape:
        raise ShapeError(f"shapes differ: {logits.shape} vs {target.shape}")
    return float(-np.sum(target * log_softmax(logits, axis=None)))


class ErrorDecomposition(NamedTuple):
    localization: float
    heatmap_err: float
    quant_err: float


def decompose_error(x_pred, x_opt, x_gt) -> ErrorDecomposition:
    """Split localization error into heatmap and quantization parts.

    The parts bound the total by the triangle inequality; they do not sum to it.
    """
    p, o, g = (np.asarray(v, dtype=np.float64) for v in (x_pred, x_opt, x_gt))
    out = ErrorDecomposition(
        float(np.hypot(*(p - g))), float(np.hypot(*(p - o))), float(np.hypot(*(o - g)))
    )
    assert out.localization <= out.heatmap_err + out.quant_err + 1e-9 * (1 + out.localization)
    return out
