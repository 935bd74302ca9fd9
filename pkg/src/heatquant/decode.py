"""Heatmap decoders: argmax, bias-corrected argmax, quarter shift and expectation.

Ties between equal cells always resolve to the smallest row-major index.
The ``*_decode`` functions work on ``(N, height, width)`` stacks and return
``(N, 2)`` pixel coordinates; the ``decode_*`` functions take a single
:class:`HeatmapGrid`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DegenerateSetError, InvalidArgumentError, InvalidHeatmapError
from .heatmap import NORMALIZED_ATOL, HeatmapGrid
from .quantizer import GridPoint, Point, check_stride, check_threshold


@dataclass(frozen=True)
class FourNeighborOfMax:
    """The 2x2 block containing the max cell that carries the most mass."""


@dataclass(frozen=True)
class NineNeighborUnion:
    """The 3x3 block centered on the max cell, clipped to the grid."""


@dataclass(frozen=True)
class TopK:
    k: int

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise InvalidArgumentError(f"TopK needs a positive integer k, got {self.k}")


ActivationStrategy = Union[FourNeighborOfMax, NineNeighborUnion, TopK]


@dataclass(frozen=True, eq=False)
class ActivationSet:
    points: tuple[GridPoint, ...]
    weights: np.ndarray

    def __post_init__(self):
        points = tuple(GridPoint(int(c), int(r)) for c, r in self.points)
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if not points:
            raise InvalidArgumentError("activation set is empty")
        if len(points) != len(weights):
            raise InvalidArgumentError("points and weights differ in length")
        if len(set(points)) != len(points):
            raise InvalidArgumentError("activation points must be distinct")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise InvalidArgumentError("weights must be finite and non-negative")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)


def _flat(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 3:
        raise InvalidHeatmapError(f"expected an (N, H, W) stack, got shape {v.shape}")
    if np.isnan(v).any():
        raise InvalidHeatmapError("heatmap contains NaN")
    return v.reshape(len(v), -1)


_SMALL_K = 16


def topk_indices(values, k: int) -> np.ndarray:
    """Row-major flat indices of the ``k`` largest cells, largest first."""
    flat = _flat(values)
    n, m = flat.shape
    if not 1 <= k <= m:
        raise InvalidArgumentError(f"k={k} outside [1, {m}]")
    if k == m:
        return np.argsort(-flat, axis=1, kind="stable")
    if k <= _SMALL_K and not np.isneginf(flat).any():
        # argmax returns the first maximum, so repeated masking keeps row-major ties
        work = flat.copy()
        rows = np.arange(n)
        out = np.empty((n, k), dtype=np.intp)
        for j in range(k):
            out[:, j] = work.argmax(axis=1)
            work[rows, out[:, j]] = -np.inf
        return out
    kth = -np.partition(-flat, k - 1, axis=1)[:, k - 1 : k]
    above = flat > kth
    # fill the remaining slots with cells equal to the k-th value, row-major first
    at = flat == kth
    need = k - above.sum(axis=1, keepdims=True)
    chosen = above | (at & (np.cumsum(at, axis=1) <= need))
    idx = np.nonzero(chosen)[1].reshape(n, k)
    order = np.argsort(-np.take_along_axis(flat, idx, axis=1), axis=1, kind="stable")
    return np.take_along_axis(idx, order, axis=1)


def argmax_cells(values) -> np.ndarray:
    """``(N, 2)`` array of ``(col, row)`` of each grid's maximum."""
    idx = _flat(values).argmax(axis=1)
    width = np.shape(values)[2]
    return np.stack([idx % width, idx // width], axis=1)


def argmax_decode(values, s, shift: float = 0.0) -> np.ndarray:
    return check_stride(s) * (argmax_cells(values) + shift)


def bias_corrected_decode(values, s, t) -> np.ndarray:
    return argmax_decode(values, s, check_threshold(t) - 0.5)


def quarter_shift_decode(values, s) -> np.ndarray:
    """Move a quarter cell from the max toward the second max, per axis."""
    width = np.shape(values)[2]
    top2 = topk_indices(values, 2)
    first = np.stack([top2[:, 0] % width, top2[:, 0] // width], axis=1)
    second = np.stack([top2[:, 1] % width, top2[:, 1] // width], axis=1)
    return check_stride(s) * (first + 0.25 * np.sign(second - first))


def _candidate_blocks(cells, width, height):
    """Top-left corners of the four 2x2 blocks containing each cell, row-major order."""
    c, r = cells[:, 0], cells[:, 1]
    corners = np.stack(
        [np.stack([c - 1, r - 1], 1), np.stack([c, r - 1], 1), np.stack([c - 1, r], 1), np.stack([c, r], 1)],
        axis=1,
    )
    valid = (corners[..., 0] >= 0) & (corners[..., 0] + 1 < width) & (corners[..., 1] >= 0) & (corners[..., 1] + 1 < height)
    return corners, valid


_OFFSETS_2X2 = np.array([[0, 0], [1, 0], [0, 1], [1, 1]])
_OFFSETS_3X3 = np.array([[dc, dr] for dr in (-1, 0, 1) for dc in (-1, 0, 1)])


def activation_cells(values, strategy: ActivationStrategy):
    """Selected cells per grid as ``(cells (N, M, 2), in_bounds (N, M))``.

    Out-of-bounds entries only occur for :class:`NineNeighborUnion` and must be
    ignored by the caller.
    """
    v = np.asarray(values, dtype=np.float64)
    flat = _flat(v)
    n, height, width = v.shape
    if isinstance(strategy, TopK):
        idx = topk_indices(v, strategy.k)
        cells = np.stack([idx % width, idx // width], axis=2)
        return cells, np.ones(idx.shape, dtype=bool)
    peak = argmax_cells(v)
    if isinstance(strategy, NineNeighborUnion):
        cells = peak[:, None, :] + _OFFSETS_3X3[None]
        ok = (cells[..., 0] >= 0) & (cells[..., 0] < width) & (cells[..., 1] >= 0) & (cells[..., 1] < height)
        return cells, ok
    if isinstance(strategy, FourNeighborOfMax):
        corners, valid = _candidate_blocks(peak, width, height)
        block = corners[:, :, None, :] + _OFFSETS_2X2[None, None]
        cc = np.clip(block[..., 0], 0, width - 1)
        rr = np.clip(block[..., 1], 0, height - 1)
        mass = np.take_along_axis(flat, (rr * width + cc).reshape(n, -1), axis=1).reshape(n, 4, 4).sum(axis=2)
        mass = np.where(valid, mass, -np.inf)
        choice = mass.argmax(axis=1)
        cells = block[np.arange(n), choice]
        return cells, np.ones(cells.shape[:2], dtype=bool)
    raise InvalidArgumentError(f"unknown activation strategy {strategy!r}")


def expectation_decode(values, s, strategy: ActivationStrategy, renormalize: bool = True) -> np.ndarray:
    """Activation-weighted mean cell position times ``s``.

    With ``renormalize`` the weights are divided by their sum over the
    selected set; otherwise the raw cell values are used as probabilities.
    """
    s = check_stride(s)
    v = np.asarray(values, dtype=np.float64)
    width = v.shape[2]
    cells, ok = activation_cells(v, strategy)
    flat = v.reshape(len(v), -1)
    idx = np.where(ok, cells[..., 1] * width + cells[..., 0], 0)
    w = np.where(ok, np.take_along_axis(flat, idx, axis=1), 0.0)
    total = w.sum(axis=1)
    if renormalize:
        if np.any(total <= 0):
            raise DegenerateSetError("activation weights sum to zero")
        w = w / total[:, None]
    elif np.any(np.abs(total - 1.0) > NORMALIZED_ATOL):
        warnings.warn("activation weights do not sum to 1; decoded coordinates shrink toward the origin", stacklevel=2)
    return s * np.einsum("nm,nmc->nc", w, cells.astype(np.float64))


def decode_argmax(h: HeatmapGrid) -> Point:
    return Point(*argmax_decode(h.values[None], h.stride)[0].tolist())


def decode_argmax_bias_corrected(h: HeatmapGrid, t) -> Point:
    return Point(*bias_corrected_decode(h.values[None], h.stride, t)[0].tolist())


def decode_quarter_shift(h: HeatmapGrid) -> Point:
    return Point(*quarter_shift_decode(h.values[None], h.stride)[0].tolist())


def select_activation_set(h: HeatmapGrid, strategy: ActivationStrategy) -> ActivationSet:
    cells, ok = activation_cells(h.values[None], strategy)
    cells = cells[0][ok[0]]
    weights = h.values[cells[:, 1], cells[:, 0]]
    return ActivationSet(tuple(GridPoint(int(c), int(r)) for c, r in cells), weights)


def decode_expectation(h: HeatmapGrid, aset: ActivationSet, renormalize: bool = True) -> Point:
    for c, r in aset.points:
        if not (0 <= c < h.width and 0 <= r < h.height):
            raise InvalidArgumentError(f"activation point ({c}, {r}) outside the grid")
    w = aset.weights
    total = w.sum()
    if renormalize:
        if total <= 0:
            raise DegenerateSetError("activation weights sum to zero")
        w = w / total
    elif abs(total - 1.0) > NORMALIZED_ATOL:
        warnings.warn(f"activation weights sum to {total:.6g}, not 1; result is not a mean", stacklevel=2)
    coords = np.array(aset.points, dtype=np.float64)
    x, y = h.stride * (w @ coords)
    return Point(float(x), float(y))
