"""Rate/time benchmarking of the codec over PLY frames.

Baselines: the whole source PLY file for the total rate, and 3 float components
per point (12 bytes for float32 sources) for the XYZ rate.  The coded XYZ size is
the geometry payload plus the geometry share of the container: the fixed header
without the channel count (48 bytes) and the geometry length field (8 bytes).
"""

from __future__ import annotations

import csv
import io
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .cloud import GaussianCloud
from .container import read_frame, write_frame
from .errors import CodecError
from .morton import encode_keys
from .pipeline import EncodeConfig, decode_cloud, encode_cloud, frame_grid, verify_alignment
from .ply_io import parse_ply
from .voxel_grid import quantize

log = logging.getLogger(__name__)

GEOMETRY_HEADER_BYTES = 48 + 8
MB = 1_000_000


def savings_pct(coded, baseline) -> float:
    """Rate saving in percent: ``100 * (1 - coded / baseline)``."""
    if baseline <= 0:
        raise ValueError(f"baseline must be positive, got {baseline}")
    return 100.0 * (1.0 - coded / baseline)


@dataclass
class RateReport:
    frame: str
    points: int = 0
    depth: int = 0
    input_total_bytes: int = 0
    input_xyz_bytes: int = 0
    coded_total_bytes: int = 0
    coded_xyz_bytes: int = 0
    coded_xyz_payload_bytes: int = 0
    total_savings_pct: float = 0.0
    xyz_savings_pct: float = 0.0
    enc_seconds: float = 0.0
    dec_seconds: float = 0.0
    lossless_verified: bool = False
    exact_positions: bool = False
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error

    def finish(self):
        self.total_savings_pct = savings_pct(self.coded_total_bytes, self.input_total_bytes)
        self.xyz_savings_pct = savings_pct(self.coded_xyz_bytes, self.input_xyz_bytes)
        return self


CSV_FIELDS = [f.name for f in fields(RateReport)]


def coded_subset(cloud: GaussianCloud, cfg: EncodeConfig, params) -> GaussianCloud:
    """The points the encoder actually keeps (drops later repeats under dedup)."""
    if cfg.dup_policy != "dedup":
        return cloud
    keys = encode_keys(quantize(cloud, params).coords, params.depth)
    _, first = np.unique(keys, return_index=True)
    return cloud.take(np.sort(first))


def bench_cloud(name: str, cloud: GaussianCloud, input_bytes: int, cfg: EncodeConfig) -> RateReport:
    t0 = time.perf_counter()
    frame = encode_cloud(cloud, cfg)
    blob = write_frame(frame)
    t1 = time.perf_counter()
    decoded = decode_cloud(read_frame(blob))
    t2 = time.perf_counter()

    params = frame_grid(frame)
    report = verify_alignment(coded_subset(cloud, cfg, params), decoded, params)
    if not report:
        log.warning("%s: %s", name, report.message)
    return RateReport(
        frame=name,
        points=cloud.n,
        depth=frame.header.depth,
        input_total_bytes=input_bytes,
        input_xyz_bytes=3 * cloud.positions.dtype.itemsize * cloud.n,
        coded_total_bytes=len(blob),
        coded_xyz_bytes=len(frame.geometry) + GEOMETRY_HEADER_BYTES,
        coded_xyz_payload_bytes=len(frame.geometry),
        enc_seconds=round(t1 - t0, 3),
        dec_seconds=round(t2 - t1, 3),
        lossless_verified=report.passed,
        exact_positions=frame.header.lossless,
    ).finish()


def bench_file(path: Path, cfg: EncodeConfig) -> RateReport:
    try:
        data = path.read_bytes()
        cloud = parse_ply(data)
        return bench_cloud(path.name, cloud, len(data), cfg)
    except (CodecError, OSError) as exc:
        log.warning("skipping %s: %s", path.name, exc)
        return RateReport(frame=path.name, error=f"{type(exc).__name__}: {exc}")


def run_bench(paths, cfg: EncodeConfig | None = None, threads: int = 1) -> list[RateReport]:
    """Benchmark each PLY path; rows come back in filename order."""
    cfg = cfg or EncodeConfig()
    paths = sorted((Path(p) for p in paths), key=lambda p: p.name)
    if threads <= 1:
        return [bench_file(p, cfg) for p in paths]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda p: bench_file(p, cfg), paths))


def aggregate(rows: list[RateReport]) -> RateReport | None:
    good = [r for r in rows if r.ok]
    if not good:
        return None
    total = RateReport(frame="ALL", depth=max(r.depth for r in good))
    for name in ("points", "input_total_bytes", "input_xyz_bytes", "coded_total_bytes",
                 "coded_xyz_bytes", "coded_xyz_payload_bytes"):
        setattr(total, name, sum(getattr(r, name) for r in good))
    total.enc_seconds = round(sum(r.enc_seconds for r in good), 3)
    total.dec_seconds = round(sum(r.dec_seconds for r in good), 3)
    total.lossless_verified = all(r.lossless_verified for r in good)
    total.exact_positions = all(r.exact_positions for r in good)
    return total.finish()


def to_csv(rows: list[RateReport]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        row = asdict(r)
        if r.ok:
            row["total_savings_pct"] = f"{r.total_savings_pct:.2f}"
            row["xyz_savings_pct"] = f"{r.xyz_savings_pct:.2f}"
            row["enc_seconds"] = f"{r.enc_seconds:.3f}"
            row["dec_seconds"] = f"{r.dec_seconds:.3f}"
        writer.writerow(row)
    return buf.getvalue()


def to_markdown(rows: list[RateReport]) -> str:
    """A table laid out like the usual source-vs-coded comparison: one block per frame."""
    head = ("| Method | Size (MB) | Total Rate | XYZ Size (MB) | XYZ Rate "
            "| Enc Time (s) | Dec Time (s) | Lossless |")
    lines = [head, "|" + "---|" * 8]
    for r in rows:
        lines.append(f"| **{r.frame}** | | | | | | | |")
        if not r.ok:
            lines.append(f"| skipped: {r.error} | | | | | | | |")
            continue
        lines.append(
            f"| source | {r.input_total_bytes / MB:.4f} | 0.00% | "
            f"{r.input_xyz_bytes / MB:.4f} | 0.00% | | | |"
        )
        lines.append(
            f"| gsgc | {r.coded_total_bytes / MB:.4f} | {r.total_savings_pct:.2f}% | "
            f"{r.coded_xyz_bytes / MB:.4f} | {r.xyz_savings_pct:.2f}% | "
            f"{r.enc_seconds:.3f} | {r.dec_seconds:.3f} | "
            f"{'yes' if r.lossless_verified else 'NO'} |"
        )
    return "\n".join(lines) + "\n"
