"""``gsgc`` command line: encode, decode, bench.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
import time
from pathlib import Path

from . import __version__
from .bench import aggregate, run_bench, to_csv, to_markdown
from .container import read_frame, write_frame
from .errors import CodecError
from .morton import MAX_DEPTH
from .pipeline import EncodeConfig, decode_cloud, encode_cloud
from .ply_io import parse_ply, write_ply

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
log = logging.getLogger("gsgc")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _depth(text: str) -> int:
    try:
        d = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid depth {text!r}") from None
    if not 1 <= d <= MAX_DEPTH:
        raise argparse.ArgumentTypeError(f"depth out of range: {d} (expected 1..{MAX_DEPTH})")
    return d


def _step(text: str) -> float:
    try:
        q = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid step {text!r}") from None
    if not q > 0 or q == float("inf"):
        raise argparse.ArgumentTypeError(f"step must be a positive number, got {text}")
    return q


def _add_grid_flags(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--depth", type=_depth, help="octree depth D (grid of 2^D voxels per axis)")
    g.add_argument("--step", type=_step, help="voxel size in scene units")
    g.add_argument("--auto", action="store_true",
                   help="step 1 for integer-valued clouds, else depth 16 (default)")
    p.add_argument("--dedup", action="store_true", help="drop repeated voxels, keeping the first")


def _config(args) -> EncodeConfig:
    return EncodeConfig(args.depth, args.step, "dedup" if args.dedup else "keep")


def _write_atomic(path: Path, data: bytes):
    """Write via a temporary file in the target directory so failures leave nothing behind."""
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=directory)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def cmd_encode(args) -> int:
    data = Path(args.input).read_bytes()
    cloud = parse_ply(data)
    t0 = time.perf_counter()
    frame = encode_cloud(cloud, _config(args))
    blob = write_frame(frame)
    elapsed = time.perf_counter() - t0
    _write_atomic(Path(args.output), blob)
    h = frame.header
    print(f"points={h.point_count} depth={h.depth} step={h.step:.9g} "
          f"geometry_bytes={len(frame.geometry)} attribute_bytes={len(frame.attributes)} "
          f"frame_bytes={len(blob)} lossless={'yes' if h.lossless else 'no'} "
          f"enc_seconds={elapsed:.3f}")
    return EXIT_OK


def cmd_decode(args) -> int:
    t0 = time.perf_counter()
    cloud = decode_cloud(read_frame(Path(args.input).read_bytes()))
    elapsed = time.perf_counter() - t0
    _write_atomic(Path(args.output), write_ply(cloud, "ascii" if args.ascii else "binary_le"))
    print(f"points={cloud.n} channels={len(cloud.schema)} dec_seconds={elapsed:.3f}")
    return EXIT_OK


def cmd_bench(args) -> int:
    src = Path(args.frames)
    paths = sorted(src.glob("*.ply")) if src.is_dir() else [src]
    if not paths:
        log.error("no .ply files in %s", src)
        return EXIT_DATA
    rows = run_bench(paths, _config(args), threads=args.threads)
    total = aggregate(rows)
    table = rows + ([total] if total and len(rows) > 1 else [])
    for target in args.report or []:
        target = Path(target)
        text = to_markdown(table) if target.suffix.lower() in (".md", ".markdown") else to_csv(table)
        _write_atomic(target, text.encode())
    print(to_markdown(table), end="")
    if total is None:
        log.error("no frame could be benchmarked")
        return EXIT_DATA
    if args.strict and not all(r.ok and r.lossless_verified for r in rows):
        log.error("strict mode: %d frame(s) failed lossless verification",
                  sum(1 for r in rows if not (r.ok and r.lossless_verified)))
        return EXIT_DATA
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gsgc", description="Lossless octree geometry codec for Gaussian-splat PLY clouds.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("encode", help="PLY -> .gsgc")
    p.add_argument("input")
    p.add_argument("output")
    _add_grid_flags(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help=".gsgc -> PLY")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--ascii", action="store_true", help="write ascii PLY instead of binary")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("bench", help="rate/time report over a directory of PLY frames")
    p.add_argument("frames", help="directory of .ply files (or a single file)")
    p.add_argument("--report", action="append", metavar="PATH",
                   help="write the report; .md gives Markdown, anything else CSV (repeatable)")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--strict", action="store_true", help="fail if any frame is not verified lossless")
    _add_grid_flags(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"gsgc: error: no such file: {exc.filename}", file=sys.stderr)
    except PermissionError as exc:
        print(f"gsgc: error: permission denied: {exc.filename}; choose a writable location",
              file=sys.stderr)
    except OSError as exc:
        print(f"gsgc: error: {exc.strerror or exc}: {exc.filename}", file=sys.stderr)
    except CodecError as exc:
        print(f"gsgc: error: {exc}", file=sys.stderr)
    return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
