"""Cube-grid quantization of point positions.

Coordinates are ``round_half_away_from_zero((p - origin) / step)``, clamped into
``[0, 2**depth)``; dequantization is ``origin + coord * step`` in float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cloud import GaussianCloud
from .errors import DepthOverflow, EmptyCloud, InvalidCloud, OutOfRange
from .morton import MAX_DEPTH, check_depth


@dataclass(frozen=True)
class GridParams:
    origin: tuple[float, float, float]
    step: float
    depth: int

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        object.__setattr__(self, "step", float(self.step))
        object.__setattr__(self, "depth", check_depth(self.depth))
        if len(self.origin) != 3 or not all(math.isfinite(o) for o in self.origin):
            raise InvalidCloud(f"grid origin must be 3 finite reals, got {self.origin}")
        if not (self.step > 0 and math.isfinite(self.step)):
            raise InvalidCloud(f"grid step must be positive, got {self.step}")


@dataclass
class VoxelizedCloud:
    coords: np.ndarray
    params: GridParams
    dup_policy: str = "keep"

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.int64).reshape(-1, 3)
        if coords.size and (coords.min() < 0 or coords.max() >= (1 << self.params.depth)):
            raise OutOfRange(f"voxel coordinates outside [0, {1 << self.params.depth})")
        if self.dup_policy not in ("keep", "dedup"):
            raise ValueError(f"unknown dup_policy {self.dup_policy!r}")
        if self.dup_policy == "dedup" and len(np.unique(coords, axis=0)) != len(coords):
            raise InvalidCloud("dedup voxel cloud contains repeated coordinates")
        self.coords = coords

    def __len__(self):
        return len(self.coords)


def _positions(cloud) -> np.ndarray:
    pos = cloud.positions if isinstance(cloud, GaussianCloud) else cloud
    return np.asarray(pos, dtype=np.float64).reshape(-1, 3)


def fit_grid(cloud, depth: int | None = None, step: float | None = None) -> GridParams:
    """Grid anchored at the componentwise minimum.

    With ``step`` the depth is the smallest D with ``extent / step < 2**D``; with
    ``depth`` the step spreads the largest axis extent over ``2**D - 1`` voxels.
    With neither, integer-valued clouds get ``step = 1`` (lossless) and anything
    else gets depth 16.
    """
    pos = _positions(cloud)
    if len(pos) == 0:
        raise EmptyCloud("cannot fit a grid to an empty cloud")
    if depth is not None and step is not None:
        raise ValueError("give depth or step, not both")
    lo = pos.min(axis=0)
    extent = float((pos.max(axis=0) - lo).max())

    if depth is None and step is None:
        if np.array_equal(pos, np.round(pos)):
            step = 1.0
        else:
            depth = 16

    if step is not None:
        step = float(step)
        if not (step > 0 and math.isfinite(step)):
            raise InvalidCloud(f"step must be positive, got {step}")
        span = extent / step
        d = 1
        while span >= (1 << d):
            d += 1
            if d > MAX_DEPTH:
                raise DepthOverflow(
                    f"depth out of range: step {step} needs more than {MAX_DEPTH} levels"
                )
        return GridParams(tuple(lo), step, d)

    depth = check_depth(depth)
    step = extent / ((1 << depth) - 1) if extent > 0 else 1.0
    return GridParams(tuple(lo), step, depth)


def _round_half_away(v: np.ndarray) -> np.ndarray:
    return np.sign(v) * np.floor(np.abs(v) + 0.5)


def quantize(cloud, params: GridParams, dup_policy: str = "keep") -> VoxelizedCloud:
    """Row-order-preserving quantization onto ``params``.

    Points whose scaled position lies below -0.5 or at/above ``2**depth`` raise
    OutOfRange; values in the rounding margin at either edge are clamped.
    """
    pos = _positions(cloud)
    scaled = (pos - np.asarray(params.origin)) / params.step
    size = 1 << params.depth
    bad = (scaled < -0.5) | (scaled >= size)
    if bad.any():
        row = int(np.flatnonzero(bad.any(axis=1))[0])
        raise OutOfRange(f"point {row} at {pos[row].tolist()} falls outside the grid")
    coords = np.clip(_round_half_away(scaled), 0, size - 1).astype(np.int64)
    if dup_policy == "dedup":
        _, first = np.unique(coords, axis=0, return_index=True)
        coords = coords[np.sort(first)]
    return VoxelizedCloud(coords, params, dup_policy)


def dequantize(v: VoxelizedCloud) -> np.ndarray:
    return np.asarray(v.params.origin) + v.coords.astype(np.float64) * v.params.step
