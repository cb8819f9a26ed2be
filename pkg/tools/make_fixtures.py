"""Regenerate the checked-in test fixtures.

    python tools/make_fixtures.py            # writes tests/fixtures/

Golden .gsgc files pin the container layout and the coder's byte output.  Only
rerun this after an intentional format change (which must also bump the
container version byte).
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from gsgc.cloud import AttributeSchema, GaussianCloud
from gsgc.container import write_frame
from gsgc.pipeline import EncodeConfig, encode_cloud
from gsgc.ply_io import write_ply
from gsgc.range_coder import encode_bits

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def lcg_schedule(n: int, n_contexts: int, seed: int = 12345):
    """Bits and contexts from a 64-bit LCG, so the inputs never depend on numpy's RNG."""
    state = seed
    bits = np.empty(n, dtype=np.uint8)
    ctx = np.empty(n, dtype=np.int64)
    for i in range(n):
        state = (state * 6364136223846793005 + 1442695040888963407) & (2**64 - 1)
        c = (state >> 33) % n_contexts
        # skew each context differently so adaptation matters
        bits[i] = 1 if ((state >> 11) & 0xFFFF) < (c + 1) * 1000 else 0
        ctx[i] = c
    return bits, ctx


def sphere_cloud(n: int = 100_000, seed: int = 0) -> GaussianCloud:
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return GaussianCloud(v.astype(np.float32))


def golden_clouds():
    rng = np.random.default_rng(7)
    schema = AttributeSchema(
        (("opacity", "float32"), ("scale_0", "float32"), ("label", "uint8"), ("id", "int32"),
         ("weight", "float64"))
    )

    def attrs(n):
        a = np.zeros(n, dtype=schema.numpy_dtype())
        a["opacity"] = rng.random(n)
        a["scale_0"] = rng.normal(size=n)
        a["label"] = rng.integers(0, 256, n)
        a["id"] = np.arange(n) * 7 - 100
        a["weight"] = rng.random(n)
        return a

    pos = rng.integers(-20, 20, size=(64, 3)).astype(np.float32)
    yield "integer_grid", GaussianCloud(pos, attrs(64), schema), EncodeConfig(step=1.0)

    pos = rng.integers(0, 8, size=(40, 3)).astype(np.float32)
    pos[10] = pos[3]
    pos[20] = pos[3]
    yield "duplicates", GaussianCloud(pos, attrs(40), schema), EncodeConfig(step=1.0)

    pos = rng.normal(size=(200, 3)) * 3.0
    yield "float_d10", GaussianCloud(pos, attrs(200), schema), EncodeConfig(depth=10)

    yield "single_point", GaussianCloud(np.array([[2.5, 0.0, -1.0]], dtype=np.float32)), EncodeConfig(depth=21)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=FIXTURES)
    args = parser.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)

    (args.out / "sphere_100k.ply").write_bytes(write_ply(sphere_cloud()))

    for name, cloud, cfg in golden_clouds():
        (args.out / f"{name}.ply").write_bytes(write_ply(cloud))
        (args.out / f"{name}.gsgc").write_bytes(write_frame(encode_cloud(cloud, cfg)))

    bits, ctx = lcg_schedule(20_000, 64)
    stream, _ = encode_bits(bits, ctx, 64)
    (args.out / "rc_golden.bin").write_bytes(stream)
    print(f"wrote fixtures to {args.out}")


if __name__ == "__main__":
    main()
