import numpy as np
import pytest

from gsgc.cloud import AttributeSchema, GaussianCloud
from gsgc.errors import NonUniqueVoxels
from gsgc.pipeline import (
    ABLATION_ENV,
    EncodeConfig,
    decode_bytes,
    decode_cloud,
    encode_bytes,
    encode_cloud,
    encode_many,
    frame_grid,
    verify_alignment,
)

from conftest import SMALL_SCHEMA, integer_cloud, pair_multiset, random_rows

ID = AttributeSchema((("id", "int32"),))


def id_cloud(points):
    pts = np.array(points, dtype=np.float32)
    return GaussianCloud(pts, np.arange(len(pts)).astype([("id", "<i4")]), ID)


def test_two_point_example_reorders_rows():
    # source order R1 at (1,1,1), R2 at (0,0,0); Morton order puts R2 first
    cloud = id_cloud([(1, 1, 1), (0, 0, 0)])
    frame = encode_cloud(cloud, EncodeConfig(step=1))
    out = decode_cloud(frame)
    assert out.positions.tolist() == [[0, 0, 0], [1, 1, 1]]
    assert out.attributes["id"].tolist() == [1, 0]
    assert verify_alignment(cloud, out, frame_grid(frame))


def test_sorted_source_is_unchanged():
    cloud = id_cloud([(0, 0, 0), (0, 0, 1), (1, 1, 1)])
    out = decode_bytes(encode_bytes(cloud, EncodeConfig(step=1)))
    assert out == cloud


def test_single_point_identity():
    cloud = id_cloud([(4, 5, 6)])
    assert decode_bytes(encode_bytes(cloud)) == cloud


def test_duplicates_keep_source_order():
    cloud = id_cloud([(1, 1, 1), (0, 0, 0), (1, 1, 1), (0, 0, 0), (1, 1, 1)])
    out = decode_bytes(encode_bytes(cloud, EncodeConfig(step=1)))
    assert out.attributes["id"].tolist() == [1, 3, 0, 2, 4]


def test_dedup_keeps_first_row():
    cloud = id_cloud([(1, 1, 1), (0, 0, 0), (1, 1, 1)])
    out = decode_bytes(encode_bytes(cloud, EncodeConfig(step=1, dup_policy="dedup")))
    assert out.attributes["id"].tolist() == [1, 0]


def test_unique_integer_clouds_are_bijective():
    rng = np.random.default_rng(0)
    for _ in range(20):
        pos = rng.choice(1 << 15, size=300, replace=False)
        pts = np.stack([pos >> 10, (pos >> 5) & 31, pos & 31], axis=1)
        cloud = GaussianCloud(pts.astype(np.float32), random_rows(rng, 300), SMALL_SCHEMA)
        frame = encode_cloud(cloud, EncodeConfig(step=1))
        out = decode_cloud(frame)
        rep = verify_alignment(cloud, out, frame_grid(frame), require_unique=True)
        assert rep and rep.mode == "unique" and rep.checked == 300
        assert pair_multiset(out) == pair_multiset(cloud)


def test_float_attributes_bit_exact():
    rng = np.random.default_rng(1)
    cloud = integer_cloud(rng, 500, 6, 0.05)
    cloud.attributes["opacity"][:3] = [np.nan, -0.0, np.inf]
    out = decode_bytes(encode_bytes(cloud))
    assert pair_multiset(out) == pair_multiset(cloud)


def test_injected_swap_is_reported():
    cloud = id_cloud([(0, 0, 0), (3, 0, 0), (0, 2, 1), (1, 1, 1)])
    frame = encode_cloud(cloud, EncodeConfig(step=1))
    out = decode_cloud(frame)
    rows = out.attributes.copy()
    rows[[1, 2]] = rows[[2, 1]]
    bad = GaussianCloud(out.positions, rows, ID)
    rep = verify_alignment(cloud, bad, frame_grid(frame))
    assert not rep
    assert rep.mismatch_index == 1
    assert rep.mismatch_voxel == tuple(int(c) for c in out.positions[1])


def test_multiset_mode_with_repeats():
    cloud = id_cloud([(0, 0, 0), (0, 0, 0), (1, 0, 0)])
    frame = encode_cloud(cloud, EncodeConfig(step=1))
    out = decode_cloud(frame)
    rep = verify_alignment(cloud, out, frame_grid(frame))
    assert rep and rep.mode == "multiset"
    with pytest.raises(NonUniqueVoxels):
        verify_alignment(cloud, out, frame_grid(frame), require_unique=True)
    rows = out.attributes.copy()
    rows[[1, 2]] = rows[[2, 1]]
    assert not verify_alignment(cloud, GaussianCloud(out.positions, rows, ID), frame_grid(frame))


def test_ablation_requires_opt_in(monkeypatch):
    cloud = id_cloud([(1, 1, 1), (0, 0, 0)])
    monkeypatch.delenv(ABLATION_ENV, raising=False)
    with pytest.raises(RuntimeError):
        encode_cloud(cloud, align=False)
    monkeypatch.setenv(ABLATION_ENV, "1")
    frame = encode_cloud(cloud, EncodeConfig(step=1), align=False)
    assert not verify_alignment(cloud, decode_cloud(frame), frame_grid(frame))


def test_encoding_is_deterministic():
    rng = np.random.default_rng(2)
    cloud = integer_cloud(rng, 2000, 8, 0.02)
    assert encode_bytes(cloud) == encode_bytes(cloud)


def test_float_positions_within_half_step():
    rng = np.random.default_rng(3)
    pos = rng.normal(size=(3000, 3)).astype(np.float64)
    cloud = GaussianCloud(pos, random_rows(rng, 3000), SMALL_SCHEMA)
    frame = encode_cloud(cloud, EncodeConfig(depth=12))
    out = decode_cloud(frame)
    assert out.positions.dtype == np.float64
    assert not frame.header.lossless
    assert verify_alignment(cloud, out, frame_grid(frame))
    src = cloud.positions[np.argsort(cloud.attributes["id"])]
    dec = out.positions[np.argsort(out.attributes["id"])]
    assert np.abs(src - dec).max() <= frame.header.step / 2 * (1 + 1e-9)


def test_encode_many_preserves_order():
    rng = np.random.default_rng(4)
    clouds = [integer_cloud(rng, int(n), 5) for n in (10, 200, 30, 1)]
    frames = encode_many(clouds, workers=3)
    assert [f.header.point_count for f in frames] == [10, 200, 30, 1]
    assert frames == encode_many(clouds, workers=1)
