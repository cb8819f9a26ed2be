"""Morton (Z-order) keys and the stable permutations built from them.

Bit layout: coordinate bit j lands at key bit 3j+2 (x), 3j+1 (y) and 3j (z),
so the top three bits of a key are the octree child index at the root.
"""

from __future__ import annotations

import numpy as np

from .errors import CoordinateOutOfRange, DepthOutOfRange, KeyOutOfRange, LengthMismatch

MAX_DEPTH = 21


def check_depth(depth: int) -> int:
    if isinstance(depth, bool) or int(depth) != depth or not 1 <= depth <= MAX_DEPTH:
        raise DepthOutOfRange(f"depth out of range: {depth!r} (expected 1..{MAX_DEPTH})")
    return int(depth)


def _spread3(v: np.ndarray) -> np.ndarray:
    """Insert two zero bits between each of the low 21 bits of ``v`` (uint64)."""
    v = v & np.uint64(0x1FFFFF)
    v = (v | (v << np.uint64(32))) & np.uint64(0x1F00000000FFFF)
    v = (v | (v << np.uint64(16))) & np.uint64(0x1F0000FF0000FF)
    v = (v | (v << np.uint64(8))) & np.uint64(0x100F00F00F00F00F)
    v = (v | (v << np.uint64(4))) & np.uint64(0x10C30C30C30C30C3)
    v = (v | (v << np.uint64(2))) & np.uint64(0x1249249249249249)
    return v


def _compact3(v: np.ndarray) -> np.ndarray:
    v = v & np.uint64(0x1249249249249249)
    v = (v | (v >> np.uint64(2))) & np.uint64(0x10C30C30C30C30C3)
    v = (v | (v >> np.uint64(4))) & np.uint64(0x100F00F00F00F00F)
    v = (v | (v >> np.uint64(8))) & np.uint64(0x1F0000FF0000FF)
    v = (v | (v >> np.uint64(16))) & np.uint64(0x1F00000000FFFF)
    v = (v | (v >> np.uint64(32))) & np.uint64(0x1FFFFF)
    return v


def encode_keys(coords: np.ndarray, depth: int) -> np.ndarray:
    """Vectorized Morton keys for an (N, 3) integer array, as uint64."""
    depth = check_depth(depth)
    coords = np.asarray(coords)
    if coords.ndim != 2 or coords.shape[1] != 3:
        raise ValueError(f"coords must be N x 3, got {coords.shape}")
    if coords.size and (coords.min() < 0 or coords.max() >= (1 << depth)):
        raise CoordinateOutOfRange(f"coordinates must lie in [0, {1 << depth})")
    c = coords.astype(np.uint64)
    return (_spread3(c[:, 0]) << np.uint64(2)) | (_spread3(c[:, 1]) << np.uint64(1)) | _spread3(c[:, 2])


def decode_keys(keys: np.ndarray, depth: int) -> np.ndarray:
    """Inverse of :func:`encode_keys`; returns an (N, 3) int64 array."""
    depth = check_depth(depth)
    keys = np.asarray(keys, dtype=np.uint64)
    if keys.size and int(keys.max()) >> (3 * depth):
        raise KeyOutOfRange(f"key exceeds {3 * depth} bits")
    out = np.empty((len(keys), 3), dtype=np.int64)
    out[:, 0] = _compact3(keys >> np.uint64(2))
    out[:, 1] = _compact3(keys >> np.uint64(1))
    out[:, 2] = _compact3(keys)
    return out


def morton_encode(u, depth: int) -> int:
    x, y, z = (int(c) for c in u)
    depth = check_depth(depth)
    for c in (x, y, z):
        if not 0 <= c < (1 << depth):
            raise CoordinateOutOfRange(f"coordinate {c} outside [0, {1 << depth})")
    return int(encode_keys(np.array([[x, y, z]]), depth)[0])


def morton_decode(key: int, depth: int) -> tuple[int, int, int]:
    depth = check_depth(depth)
    key = int(key)
    if not 0 <= key < (1 << (3 * depth)):
        raise KeyOutOfRange(f"key {key} outside [0, 2^{3 * depth})")
    x, y, z = decode_keys(np.array([key], dtype=np.uint64), depth)[0]
    return int(x), int(y), int(z)


def sort_permutation(keys) -> np.ndarray:
    """Stable ascending order of ``keys``: ``out[i] = in[perm[i]]``."""
    return np.argsort(np.asarray(keys), kind="stable")


def invert_permutation(perm) -> np.ndarray:
    perm = np.asarray(perm)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm), dtype=perm.dtype)
    return inv


def is_permutation(perm, n: int) -> bool:
    perm = np.asarray(perm)
    if perm.shape != (n,):
        return False
    seen = np.zeros(n, dtype=bool)
    if n and (perm.min() < 0 or perm.max() >= n):
        return False
    seen[perm] = True
    return bool(seen.all())


def apply_permutation(rows, perm) -> np.ndarray:
    """Reorder the first axis of ``rows`` so that row i becomes ``rows[perm[i]]``."""
    rows = np.asarray(rows)
    perm = np.asarray(perm)
    if len(rows) != len(perm):
        raise LengthMismatch(f"{len(rows)} rows but permutation of length {len(perm)}")
    return rows[perm]
