"""Heatmap grids and the encoders that turn coordinates into them.

Batch encoders take an ``(N, 2)`` array of ``(x, y)`` pixel coordinates and
return an ``(N, height, width)`` float64 stack. The single-point ``encode_*``
functions wrap them and return a :class:`HeatmapGrid`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EncodeOutOfBoundsError, InvalidArgumentError, InvalidHeatmapError
from .quantizer import check_stride, check_threshold, decompose, quantize_random_round, quantize_threshold
from .rng import RngStream

# tolerance for treating a grid as a probability distribution
NORMALIZED_ATOL = 1e-6


@dataclass(frozen=True, eq=False)
class HeatmapGrid:
    """One landmark's activation grid, stored row-major as ``values[row, col]``."""

    values: np.ndarray
    stride: float
    normalized: bool = False

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise InvalidHeatmapError(f"heatmap must be 2-D, got shape {values.shape}")
        if values.shape[0] < 2 or values.shape[1] < 2:
            raise InvalidHeatmapError(f"heatmap must be at least 2x2, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidHeatmapError("heatmap contains NaN or infinite values")
        if np.any(values < 0):
            raise InvalidHeatmapError("heatmap values must be non-negative")
        if self.normalized and abs(values.sum() - 1.0) > NORMALIZED_ATOL:
            raise InvalidHeatmapError(f"grid flagged normalized but sums to {values.sum()!r}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "stride", check_stride(self.stride))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "stride": self.stride,
            "normalized": self.normalized,
            "values": self.values.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> HeatmapGrid:
        values = np.asarray(d["values"], dtype=np.float64).reshape(d["height"], d["width"])
        return cls(values, d["stride"], bool(d.get("normalized", False)))


@dataclass(frozen=True)
class GaussianConfig:
    sigma: float
    radius: int | None = field(default=None)

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma >= 0):
            raise InvalidArgumentError(f"sigma must be finite and >= 0, got {self.sigma}")
        if self.radius is not None and self.radius < 0:
            raise InvalidArgumentError("kernel radius must be >= 0")

    @property
    def kernel_radius(self) -> int:
        return math.ceil(3 * self.sigma) if self.radius is None else int(self.radius)


def _check_dims(dims) -> tuple[int, int]:
    width, height = (int(d) for d in dims)
    if width < 2 or height < 2:
        raise InvalidArgumentError(f"grid must be at least 2x2, got {width}x{height}")
    return width, height


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InvalidArgumentError(f"points must have shape (N, 2), got {pts.shape}")
    return pts


def _check_cells(cols, rows, width, height, what="activation cell"):
    bad = (cols < 0) | (cols >= width) | (rows < 0) | (rows >= height)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise EncodeOutOfBoundsError(
            f"{what} ({int(cols[i])}, {int(rows[i])}) of point {i} is outside the {width}x{height} grid"
        )


def binary_heatmaps(points, s, dims, t=0.5) -> np.ndarray:
    """One-hot grids at the threshold-quantized cell of each point."""
    width, height = _check_dims(dims)
    pts = _as_points(points)
    cols = quantize_threshold(pts[:, 0], s, t)
    rows = quantize_threshold(pts[:, 1], s, t)
    _check_cells(cols, rows, width, height)
    out = np.zeros((len(pts), height, width))
    out[np.arange(len(pts)), rows, cols] = 1.0
    return out


def expected_heatmaps(points, s, dims) -> np.ndarray:
    """Bilinear activation probabilities over the four cells around each point.

    This is the expectation of :func:`sampled_heatmaps`.
    """
    width, height = _check_dims(dims)
    pts = _as_points(points)
    bx, ex = decompose(pts[:, 0], s)
    by, ey = decompose(pts[:, 1], s)
    _check_cells(bx, by, width, height)
    _check_cells(bx + (ex > 0), by + (ey > 0), width, height)
    # upper neighbours only matter when their weight is nonzero; clip and accumulate
    bx1, by1 = np.minimum(bx + 1, width - 1), np.minimum(by + 1, height - 1)
    n = np.arange(len(pts))
    out = np.zeros((len(pts), height, width))
    np.add.at(out, (n, by, bx), (1 - ex) * (1 - ey))
    np.add.at(out, (n, by, bx1), ex * (1 - ey))
    np.add.at(out, (n, by1, bx), (1 - ex) * ey)
    np.add.at(out, (n, by1, bx1), ex * ey)
    return out


def sample_cells(points, s, dims, rng: RngStream) -> np.ndarray:
    """Randomly rounded ``(col, row)`` cell per point, axes drawn independently.

    Consumes two uniforms per point, x before y.
    """
    width, height = _check_dims(dims)
    pts = _as_points(points)
    base, frac = decompose(pts, s)
    _check_cells(base[:, 0], base[:, 1], width, height)
    top = base + (frac > 0)
    _check_cells(top[:, 0], top[:, 1], width, height)
    return quantize_random_round(pts, s, rng)


def sampled_heatmaps(points, s, dims, rng: RngStream) -> np.ndarray:
    width, height = _check_dims(dims)
    cells = sample_cells(points, s, dims, rng)
    out = np.zeros((len(cells), height, width))
    out[np.arange(len(cells)), cells[:, 1], cells[:, 0]] = 1.0
    return out


def gaussian_heatmaps(points, s, dims, cfg: GaussianConfig, t=0.5, center_mode="quantized") -> np.ndarray:
    """Unnormalized isotropic Gaussians with peak value 1 at the center.

    ``center_mode="quantized"`` centers on the threshold-quantized cell;
    ``"exact"`` centers on ``point / s``. Cells more than the kernel radius
    away from the center along either axis are zero. ``sigma == 0`` gives the
    binary heatmap in both modes.
    """
    if center_mode not in ("quantized", "exact"):
        raise InvalidArgumentError(f"unknown center_mode {center_mode!r}")
    if cfg.sigma == 0:
        return binary_heatmaps(points, s, dims, t)
    width, height = _check_dims(dims)
    pts = _as_points(points)
    s = check_stride(s)
    if center_mode == "quantized":
        cx = quantize_threshold(pts[:, 0], s, t).astype(np.float64)
        cy = quantize_threshold(pts[:, 1], s, t).astype(np.float64)
        _check_cells(cx.astype(np.int64), cy.astype(np.int64), width, height, "center")
    else:
        cx, cy = pts[:, 0] / s, pts[:, 1] / s
        bad = (cx < 0) | (cx > width - 1) | (cy < 0) | (cy > height - 1)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise EncodeOutOfBoundsError(f"center ({cx[i]}, {cy[i]}) of point {i} is outside the grid")
    dx = np.arange(width)[None, None, :] - cx[:, None, None]
    dy = np.arange(height)[None, :, None] - cy[:, None, None]
    r = cfg.kernel_radius
    inside = (np.abs(dx) <= r) & (np.abs(dy) <= r)
    return np.where(inside, np.exp(-(dx**2 + dy**2) / (2 * cfg.sigma**2)), 0.0)


def encode_binary(gt, s, dims, t=0.5) -> HeatmapGrid:
    check_threshold(t)
    return HeatmapGrid(binary_heatmaps([gt], s, dims, t)[0], s, normalized=True)


def encode_gaussian(gt, s, dims, cfg: GaussianConfig, t=0.5, center_mode="quantized") -> HeatmapGrid:
    values = gaussian_heatmaps([gt], s, dims, cfg, t, center_mode)[0]
    return HeatmapGrid(values, s, normalized=cfg.sigma == 0)


def encode_expected(gt, s, dims) -> HeatmapGrid:
    return HeatmapGrid(expected_heatmaps([gt], s, dims)[0], s, normalized=True)


def encode_sampled(gt, s, dims, rng: RngStream) -> HeatmapGrid:
    return HeatmapGrid(sampled_heatmaps([gt], s, dims, rng)[0], s, normalized=True)
