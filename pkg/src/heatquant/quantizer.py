"""Scalar quantization of coordinates onto a strided heatmap lattice.

All functions accept Python scalars or numpy arrays and broadcast
element-wise. Scalars in give scalars out.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import InvalidArgumentError
from .rng import RngStream

# fractional parts this close to 1 are treated as the next integer
SNAP_EPS = 1e-12


class Point(NamedTuple):
    """Continuous (x, y) coordinate in input-image pixels."""

    x: float
    y: float


class GridPoint(NamedTuple):
    """Integer heatmap cell, column then row."""

    col: int
    row: int


class FractionalDecomposition(NamedTuple):
    base: int | np.ndarray
    frac: float | np.ndarray


def check_stride(s) -> float:
    s = float(s)
    if not np.isfinite(s) or s < 1.0:
        raise InvalidArgumentError(f"stride must be finite and >= 1, got {s}")
    return s


def check_threshold(t) -> float:
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise InvalidArgumentError(f"threshold must lie in [0, 1], got {t}")
    return t


def _as_coords(x):
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("coordinates must be finite")
    return arr


def _unwrap(arr, scalar: bool):
    return arr.item() if scalar else arr


def decompose(x, s) -> FractionalDecomposition:
    """Split ``x / s`` into an integer cell index and a fractional part in [0, 1)."""
    s = check_stride(s)
    arr = _as_coords(x)
    scalar = arr.ndim == 0
    q = arr / s
    base = np.floor(q)
    frac = q - base
    snap = frac >= 1.0 - SNAP_EPS
    base = np.where(snap, base + 1.0, base)
    frac = np.where(snap, 0.0, frac)
    return FractionalDecomposition(_unwrap(base.astype(np.int64), scalar), _unwrap(frac, scalar))


def quantize_threshold(x, s, t):
    """Unified floor/round/ceil quantizer: step up to the next cell iff frac >= t.

    ``t=1`` is floor and ``t=0.5`` rounds half up. ``t=0`` steps up even when
    the fractional part is exactly zero.
    """
    t = check_threshold(t)
    base, frac = decompose(x, s)
    up = np.asarray(frac) >= t
    if np.ndim(base) == 0:
        return int(base) + int(up)
    return base + up


def quantize_random_round(x, s, rng: RngStream):
    """Randomized rounding: step up with probability equal to the fractional part.

    Draws exactly one uniform variate per element of ``x``. The threshold is
    taken from (0, 1] so an exact multiple of ``s`` never steps up.
    """
    base, frac = decompose(x, s)
    if np.ndim(base) == 0:
        t = 1.0 - rng.uniform()
        return int(base) + int(frac >= t)
    t = 1.0 - rng.uniform(np.shape(base))
    return base + (np.asarray(frac) >= t)


def threshold_bias(t) -> float:
    """Expected per-axis offset, in cells, of ``quantize_threshold`` under uniform fractions."""
    return 0.5 - check_threshold(t)
