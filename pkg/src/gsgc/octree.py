"""Breadth-first octree occupancy coding of voxel sets.

A level-l node is a distinct 3l-bit Morton prefix; its 8-bit mask has bit c set
when some voxel key continues the prefix with child index c.  Nodes are visited
level by level in ascending prefix order, which is also the order in which their
children appear on the next level.  Mask bits go through the range coder from
child 0 to 7 under context ``8 * child + (ones already coded in this mask)``.
After the last level, each leaf's extra-point count k - 1 is coded in unary
(k - 1 ones, then a zero) under one extra context.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import CorruptPayload, EmptyCloud
from .morton import check_depth, decode_keys, encode_keys
from .range_coder import (
    D_OVERRUN,
    D_POS,
    E_POS,
    IMPLICIT_TAIL,
    PROB_INIT,
    dec_bit,
    dec_init,
    enc_bit,
    enc_finish,
    enc_init,
)
from .voxel_grid import GridParams, VoxelizedCloud

N_OCC_CONTEXTS = 64
DUP_CONTEXT = 64
N_CONTEXTS = 65

# decoder status codes
OK, OVERRUN, TOO_MANY_NODES, EMPTY_MASK, COUNT_MISMATCH, TRAILING = range(6)
_STATUS_TEXT = {
    OVERRUN: "stream exhausted before decoding finished",
    TOO_MANY_NODES: "more occupied nodes than points",
    EMPTY_MASK: "decoded an empty occupancy mask",
    COUNT_MISMATCH: "decoded point count disagrees with the header",
    TRAILING: "unconsumed bytes after the geometry stream",
}


@dataclass
class OccupancyStream:
    levels: list[np.ndarray]  # uint8 masks per level, level 0 first
    dup_counts: np.ndarray  # multiplicity - 1 per leaf, leaf (Morton) order

    @property
    def masks(self) -> np.ndarray:
        return np.concatenate(self.levels) if self.levels else np.zeros(0, np.uint8)

    @property
    def n_points(self) -> int:
        return int(len(self.dup_counts) + self.dup_counts.sum())


def unique_keys(keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sorted distinct keys and their multiplicities."""
    keys = np.sort(np.asarray(keys, dtype=np.uint64), kind="stable")
    if len(keys) == 0:
        return keys, np.zeros(0, dtype=np.int64)
    start = np.flatnonzero(np.concatenate(([True], keys[1:] != keys[:-1])))
    counts = np.diff(np.append(start, len(keys)))
    return keys[start], counts.astype(np.int64)


def occupancy_from_keys(ukeys: np.ndarray, counts: np.ndarray, depth: int) -> OccupancyStream:
    """Occupancy masks for sorted distinct keys (see module docstring)."""
    depth = check_depth(depth)
    if len(ukeys) == 0:
        raise EmptyCloud("cannot build an octree over zero points")
    levels = []
    for level in range(depth):
        shift = np.uint64(3 * (depth - level - 1))
        child = ukeys >> shift
        child = child[np.concatenate(([True], child[1:] != child[:-1]))]
        parent = child >> np.uint64(3)
        starts = np.flatnonzero(np.concatenate(([True], parent[1:] != parent[:-1])))
        bits = np.left_shift(1, (child & np.uint64(7)).astype(np.int64))
        levels.append(np.bitwise_or.reduceat(bits, starts).astype(np.uint8))
    return OccupancyStream(levels, np.asarray(counts, dtype=np.int64) - 1)


def build_occupancy(v: VoxelizedCloud) -> OccupancyStream:
    if len(v) == 0:
        raise EmptyCloud("cannot build an octree over zero points")
    ukeys, counts = unique_keys(encode_keys(v.coords, v.params.depth))
    return occupancy_from_keys(ukeys, counts, v.params.depth)


@njit(cache=True, nogil=True)
def _checksum(probs):
    s = np.int64(0)
    for i in range(probs.shape[0]):
        s = (s * 31 + probs[i]) & 0x7FFFFFFFFFFF
    return s


@njit(cache=True, nogil=True)
def _encode_occupancy(masks, level_sizes, dups, out, trace):
    st = np.empty(6, dtype=np.int64)
    enc_init(st)
    probs = np.full(N_CONTEXTS, PROB_INIT, dtype=np.int64)
    i = 0
    for level in range(level_sizes.shape[0]):
        for _ in range(level_sizes[level]):
            m = masks[i]
            i += 1
            ones = 0
            for c in range(8):
                bit = (m >> c) & 1
                enc_bit(st, out, probs, 8 * c + ones, bit)
                ones += bit
        trace[level] = _checksum(probs)
    for j in range(dups.shape[0]):
        for _ in range(dups[j]):
            enc_bit(st, out, probs, DUP_CONTEXT, 1)
        enc_bit(st, out, probs, DUP_CONTEXT, 0)
    trace[level_sizes.shape[0]] = _checksum(probs)
    enc_finish(st, out)
    return st[E_POS]


@njit(cache=True, nogil=True)
def _decode_occupancy(data, depth, n_points, keys, counts, level_sizes, trace):
    """Fill ``keys``/``counts`` with the decoded leaves; returns (status, n_leaves)."""
    st = np.empty(4, dtype=np.int64)
    dec_init(st, data)
    if st[D_OVERRUN]:
        return OVERRUN, 0
    probs = np.full(N_CONTEXTS, PROB_INIT, dtype=np.int64)
    cur = np.zeros(n_points, dtype=np.int64)
    nxt = np.empty(n_points, dtype=np.int64)
    n_cur = 1
    for level in range(depth):
        level_sizes[level] = n_cur
        n_nxt = 0
        for k in range(n_cur):
            base = cur[k] << 3
            ones = 0
            for c in range(8):
                bit = dec_bit(st, data, probs, 8 * c + ones)
                if bit:
                    if n_nxt == n_points:
                        return TOO_MANY_NODES, 0
                    nxt[n_nxt] = base + c
                    n_nxt += 1
                    ones += 1
            if st[D_OVERRUN]:
                return OVERRUN, 0
            if ones == 0:
                return EMPTY_MASK, 0
        trace[level] = _checksum(probs)
        cur, nxt = nxt, cur
        n_cur = n_nxt
    total = n_cur
    for j in range(n_cur):
        keys[j] = cur[j]
        k = 1
        while dec_bit(st, data, probs, DUP_CONTEXT):
            if st[D_OVERRUN]:
                return OVERRUN, 0
            k += 1
            total += 1
            if total > n_points:
                return COUNT_MISMATCH, 0
        if st[D_OVERRUN]:
            return OVERRUN, 0
        counts[j] = k
    trace[depth] = _checksum(probs)
    if total != n_points:
        return COUNT_MISMATCH, 0
    if st[D_POS] != data.shape[0] + IMPLICIT_TAIL:
        return TRAILING, 0
    return OK, n_cur


def encode_occupancy(occ: OccupancyStream, trace: np.ndarray | None = None) -> bytes:
    """Entropy-code an occupancy stream; ``trace`` receives per-level context checksums."""
    masks = np.ascontiguousarray(occ.masks, dtype=np.uint8)
    sizes = np.array([len(m) for m in occ.levels], dtype=np.int64)
    dups = np.ascontiguousarray(occ.dup_counts, dtype=np.int64)
    if trace is None:
        trace = np.zeros(len(sizes) + 1, dtype=np.int64)
    # < 7.1 output bits per coded bit, see range_coder.worst_case_bytes
    cap = 8 * len(masks) + len(dups) + int(dups.sum()) + 16
    out = np.empty(cap, dtype=np.uint8)
    n = _encode_occupancy(masks, sizes, dups, out, trace)
    return out[:n].tobytes()


def decode_leaves(payload: bytes, depth: int, point_count: int, trace: np.ndarray | None = None):
    """Decode a geometry payload into (sorted distinct keys, multiplicities, level sizes)."""
    depth = check_depth(depth)
    if point_count < 1:
        raise CorruptPayload(f"point count must be positive, got {point_count}")
    data = np.frombuffer(bytes(payload), dtype=np.uint8)
    keys = np.empty(point_count, dtype=np.int64)
    counts = np.empty(point_count, dtype=np.int64)
    sizes = np.zeros(depth, dtype=np.int64)
    if trace is None:
        trace = np.zeros(depth + 1, dtype=np.int64)
    status, n = _decode_occupancy(data, depth, point_count, keys, counts, sizes, trace)
    if status != OK:
        raise CorruptPayload(f"corrupt geometry payload: {_STATUS_TEXT[status]}")
    return keys[:n].astype(np.uint64), counts[:n], sizes


def encode_geometry(v: VoxelizedCloud) -> bytes:
    return encode_occupancy(build_occupancy(v))


def decode_geometry(payload: bytes, depth: int, point_count: int) -> VoxelizedCloud:
    """Voxels in ascending Morton order, duplicates adjacent.

    The returned grid is the bare integer lattice (origin 0, step 1).
    """
    keys, counts, _ = decode_leaves(payload, depth, point_count)
    coords = decode_keys(np.repeat(keys, counts), depth)
    return VoxelizedCloud(coords, GridParams((0.0, 0.0, 0.0), 1.0, depth))
