"""Cloud-level encode/decode with geometry-attribute alignment.

The decoder emits voxels in ascending Morton order no matter how the source was
ordered.  The encoder therefore sorts points by Morton key (stably, so repeated
voxels keep their source order) and stores attribute rows in that same order;
decoded row i then belongs to decoded point i without any transmitted index.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cloud import GaussianCloud
from .container import (
    FLAG_DUPLICATES,
    FLAG_FLOAT64_POSITIONS,
    FLAG_LOSSLESS,
    CodedFrame,
    FrameHeader,
    read_frame,
    write_frame,
)
from .errors import CorruptPayload, EmptyCloud, NonUniqueVoxels
from .morton import decode_keys, encode_keys, sort_permutation
from .octree import decode_leaves, encode_occupancy, occupancy_from_keys
from .voxel_grid import GridParams, fit_grid, quantize

ABLATION_ENV = "GSGC_ALLOW_ABLATION"


@dataclass(frozen=True)
class EncodeConfig:
    """Grid selection (explicit depth, explicit step, or neither for auto) and duplicate policy."""

    depth: int | None = None
    step: float | None = None
    dup_policy: str = "keep"

    def __post_init__(self):
        if self.depth is not None and self.step is not None:
            raise ValueError("choose at most one of depth and step")
        if self.dup_policy not in ("keep", "dedup"):
            raise ValueError(f"unknown dup_policy {self.dup_policy!r}")

    @property
    def mode(self) -> str:
        if self.depth is not None:
            return "depth"
        return "step" if self.step is not None else "auto"


def _runs(sorted_keys: np.ndarray) -> np.ndarray:
    """Boolean mask marking the first element of each run of equal keys."""
    first = np.ones(len(sorted_keys), dtype=bool)
    first[1:] = sorted_keys[1:] != sorted_keys[:-1]
    return first


def encode_cloud(cloud: GaussianCloud, cfg: EncodeConfig | None = None, *, align: bool = True) -> CodedFrame:
    """Quantize, Morton-sort, and code ``cloud`` into a frame.

    ``align=False`` stores attributes in source order (the misalignment the
    sorting exists to prevent).  It is refused unless the GSGC_ALLOW_ABLATION
    environment variable is set, which only the test harness does.
    """
    cfg = cfg or EncodeConfig()
    if not align and os.environ.get(ABLATION_ENV) != "1":
        raise RuntimeError(f"unaligned encoding is a test-only ablation; set {ABLATION_ENV}=1")
    if cloud.n == 0:
        raise EmptyCloud("cannot encode an empty cloud")

    params = fit_grid(cloud, cfg.depth, cfg.step)
    coords = quantize(cloud, params).coords
    keys = encode_keys(coords, params.depth)
    perm = sort_permutation(keys)
    skeys = keys[perm]
    if cfg.dup_policy == "dedup":
        keep = _runs(skeys)
        perm, skeys = perm[keep], skeys[keep]

    first = _runs(skeys)
    starts = np.flatnonzero(first)
    counts = np.diff(np.append(starts, len(skeys)))
    occ = occupancy_from_keys(skeys[starts], counts, params.depth)
    geometry = encode_occupancy(occ)

    rows = cloud.attributes[perm] if align else cloud.attributes[np.sort(perm)]
    src = cloud.positions[perm].astype(np.float64)
    recon = np.asarray(params.origin) + coords[perm].astype(np.float64) * params.step
    flags = 0
    if np.array_equal(src, recon):
        flags |= FLAG_LOSSLESS
    if (counts > 1).any():
        flags |= FLAG_DUPLICATES
    if cloud.positions.dtype == np.float64:
        flags |= FLAG_FLOAT64_POSITIONS
    header = FrameHeader(params.depth, len(perm), params.origin, params.step, cloud.schema, flags)
    return CodedFrame(header, geometry, rows.tobytes())


def frame_grid(frame: CodedFrame) -> GridParams:
    h = frame.header
    return GridParams(h.origin, h.step, h.depth)


def decode_cloud(frame: CodedFrame) -> GaussianCloud:
    """Reconstruct the cloud in Morton order; row i of the attributes belongs to point i."""
    h = frame.header
    frame.check()
    keys, counts, _ = decode_leaves(frame.geometry, h.depth, h.point_count)
    if h.duplicates != bool((counts > 1).any()):
        raise CorruptPayload("duplicate flag disagrees with the decoded geometry")
    coords = decode_keys(np.repeat(keys, counts), h.depth)
    positions = np.asarray(h.origin) + coords.astype(np.float64) * h.step
    if not h.float64_positions:
        positions = positions.astype(np.float32)
    dtype = h.schema.numpy_dtype()
    attrs = np.frombuffer(frame.attributes, dtype=dtype, count=h.point_count).copy() if dtype.itemsize else None
    return GaussianCloud(positions, attrs, h.schema)


def encode_bytes(cloud: GaussianCloud, cfg: EncodeConfig | None = None) -> bytes:
    return write_frame(encode_cloud(cloud, cfg))


def decode_bytes(data: bytes) -> GaussianCloud:
    return decode_cloud(read_frame(data))


def encode_many(clouds, cfg: EncodeConfig | None = None, workers: int = 1) -> list[CodedFrame]:
    """Encode independent frames on a thread pool; results keep input order."""
    if workers <= 1:
        return [encode_cloud(c, cfg) for c in clouds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda c: encode_cloud(c, cfg), clouds))


@dataclass
class AlignmentReport:
    passed: bool
    checked: int
    mode: str  # "unique" (voxel -> row map) or "multiset"
    mismatch_index: int | None = None
    mismatch_voxel: tuple[int, int, int] | None = None
    message: str = "ok"

    def __bool__(self):
        return self.passed


def _row_bytes(cloud: GaussianCloud) -> np.ndarray:
    """One fixed-width void scalar per attribute row (bytewise comparable)."""
    width = cloud.attributes.dtype.itemsize
    if width == 0:
        return np.zeros(cloud.n, dtype="V1")
    return np.ascontiguousarray(cloud.attributes).view(f"V{width}")


def _voxel_keys(cloud: GaussianCloud, params: GridParams) -> np.ndarray:
    return encode_keys(quantize(cloud, params).coords, params.depth)


def verify_alignment(
    original: GaussianCloud,
    decoded: GaussianCloud,
    params: GridParams,
    require_unique: bool = False,
) -> AlignmentReport:
    """Check that every decoded point carries its source point's attribute row.

    With distinct source voxels, each decoded point is looked up by voxel in the
    source and the rows compared; the first disagreement (in decoded order) is
    reported.  Repeated voxels make that lookup ambiguous, so the (voxel, row)
    pairs are compared as multisets instead, or NonUniqueVoxels is raised when
    ``require_unique`` is set.
    """
    if original.schema != decoded.schema:
        return AlignmentReport(False, 0, "unique", message="attribute schemas differ")
    ko = _voxel_keys(original, params)
    kd = _voxel_keys(decoded, params)
    ro = _row_bytes(original)
    rd = _row_bytes(decoded)
    order = np.argsort(ko, kind="stable")
    ko_sorted = ko[order]
    unique = len(ko) < 2 or bool((ko_sorted[1:] != ko_sorted[:-1]).all())
    mode = "unique" if unique else "multiset"
    if not unique and require_unique:
        raise NonUniqueVoxels("source cloud has repeated voxels")

    def fail(i, key, why):
        voxel = tuple(int(c) for c in decode_keys(np.array([key], dtype=np.uint64), params.depth)[0])
        where = f" at decoded point {i}" if i is not None else ""
        return AlignmentReport(
            False, len(kd), mode, None if i is None else int(i), voxel, f"{why}{where}, voxel {voxel}"
        )

    if len(ko) != len(kd):
        return AlignmentReport(False, len(kd), mode, message=f"point count {len(kd)} != {len(ko)}")
    if len(kd) == 0:
        return AlignmentReport(True, 0, mode)

    if unique:
        pos = np.minimum(np.searchsorted(ko_sorted, kd), len(ko_sorted) - 1)
        found = ko_sorted[pos] == kd
        same = found & (ro[order[pos]] == rd)
        kd_sorted = np.sort(kd)
        rep = np.flatnonzero(kd_sorted[1:] == kd_sorted[:-1])
        if len(rep):
            key = kd_sorted[rep[0]]
            return fail(np.flatnonzero(kd == key)[1], key, "voxel decoded twice")
        if not same.all():
            i = int(np.flatnonzero(~same)[0])
            return fail(i, kd[i], "attribute row mismatch" if found[i] else "voxel absent from source")
        return AlignmentReport(True, len(kd), mode)

    pair = np.dtype([("k", ">u8"), ("r", ro.dtype)])
    a = np.empty(len(ko), dtype=pair)
    a["k"], a["r"] = ko, ro
    b = np.empty(len(kd), dtype=pair)
    b["k"], b["r"] = kd, rd
    flat = f"V{pair.itemsize}"
    sa, sb = np.sort(a.view(flat)), np.sort(b.view(flat))
    diff = np.flatnonzero(sa != sb)
    if len(diff):
        i = int(diff[0])
        return fail(None, int(sb[i:i + 1].view(pair)["k"][0]), "(voxel, row) multiset mismatch")
    return AlignmentReport(True, len(kd), mode)
