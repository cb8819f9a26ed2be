"""Read and write Gaussian-splat PLY files (ascii and binary_little_endian)."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from .cloud import DTYPES, POSITION_NAMES, AttributeSchema, GaussianCloud
from .errors import MalformedHeader, MissingPosition, NonFiniteCoordinate, TruncatedPayload

log = logging.getLogger(__name__)

# PLY type name -> canonical dtype name
PLY_TYPES = {
    "float": "float32",
    "float32": "float32",
    "double": "float64",
    "float64": "float64",
    "uchar": "uint8",
    "uint8": "uint8",
    "int": "int32",
    "int32": "int32",
}
FORMATS = {"ascii": "ascii", "binary_little_endian": "binary_le"}


def _parse_header(data: bytes):
    """Return (format, vertex_count, properties, body_offset)."""
    if not data.startswith(b"ply\n") and not data.startswith(b"ply\r\n"):
        raise MalformedHeader("missing 'ply' magic")
    end = data.find(b"end_header")
    if end < 0:
        raise MalformedHeader("no end_header line")
    nl = data.find(b"\n", end)
    if nl < 0:
        raise MalformedHeader("end_header not terminated by newline")
    try:
        text = data[:end].decode("ascii")
    except UnicodeDecodeError:
        raise MalformedHeader("header is not ASCII") from None

    fmt = None
    vertex_count = None
    props = []
    element = None
    elements_seen = []
    for line in text.splitlines()[1:]:
        tok = line.split()
        if not tok or tok[0] in ("comment", "obj_info"):
            continue
        if tok[0] == "format":
            if len(tok) != 3 or tok[2] != "1.0":
                raise MalformedHeader(f"bad format line {line!r}")
            if tok[1] not in FORMATS:
                raise MalformedHeader(f"unsupported PLY format {tok[1]!r}")
            fmt = FORMATS[tok[1]]
        elif tok[0] == "element":
            if len(tok) != 3:
                raise MalformedHeader(f"bad element line {line!r}")
            element = tok[1]
            elements_seen.append(element)
            if element == "vertex":
                if len(elements_seen) != 1:
                    raise MalformedHeader("vertex must be the first element")
                try:
                    vertex_count = int(tok[2])
                except ValueError:
                    raise MalformedHeader(f"bad vertex count {tok[2]!r}") from None
                if vertex_count < 0:
                    raise MalformedHeader("negative vertex count")
        elif tok[0] == "property":
            if element is None:
                raise MalformedHeader("property before any element")
            if element != "vertex":
                continue
            if len(tok) >= 2 and tok[1] == "list":
                raise MalformedHeader("list properties are not allowed on vertices")
            if len(tok) != 3:
                raise MalformedHeader(f"bad property line {line!r}")
            if tok[1] not in PLY_TYPES:
                raise MalformedHeader(f"unsupported property type {tok[1]!r}")
            props.append((tok[2], PLY_TYPES[tok[1]]))
        else:
            raise MalformedHeader(f"unexpected header line {line!r}")

    if fmt is None:
        raise MalformedHeader("no format line")
    if vertex_count is None:
        raise MalformedHeader("no vertex element")
    names = [n for n, _ in props]
    if len(set(names)) != len(names):
        raise MalformedHeader("duplicate vertex property names")
    return fmt, vertex_count, props, nl + 1


def _position_dtype(props) -> str:
    types = {name: dtype for name, dtype in props}
    missing = [a for a in POSITION_NAMES if a not in types]
    if missing:
        raise MissingPosition(f"vertex element lacks {', '.join(missing)}")
    pos_types = {types[a] for a in POSITION_NAMES}
    if len(pos_types) != 1 or not pos_types <= {"float32", "float64"}:
        raise MalformedHeader("x, y, z must share one float type (float or double)")
    return pos_types.pop()


def split_ply(data: bytes) -> tuple[GaussianCloud, bytes]:
    """Parse a PLY byte string, returning the cloud and any unread trailing bytes."""
    data = bytes(data)
    fmt, n, props, offset = _parse_header(data)
    pos_dtype = _position_dtype(props)
    schema = AttributeSchema(tuple(p for p in props if p[0] not in POSITION_NAMES))
    row_dtype = np.dtype([(name, DTYPES[dt][0]) for name, dt in props])

    if fmt == "binary_le":
        need = n * row_dtype.itemsize
        if len(data) - offset < need:
            raise TruncatedPayload(
                f"header promises {need} bytes of vertex data, found {len(data) - offset}"
            )
        table = np.frombuffer(data, dtype=row_dtype, count=n, offset=offset).copy()
        trailing = data[offset + need:]
    else:
        table, consumed = _parse_ascii_body(data, offset, n, props, row_dtype)
        trailing = data[consumed:]

    positions = np.stack([table[a] for a in POSITION_NAMES], axis=1).astype(
        DTYPES[pos_dtype][0], copy=False
    )
    if not np.isfinite(positions).all():
        bad = int(np.flatnonzero(~np.isfinite(positions).all(axis=1))[0])
        raise NonFiniteCoordinate(f"vertex {bad} has a non-finite coordinate")
    attrs = np.empty(n, dtype=schema.numpy_dtype())
    for name in schema.names:
        attrs[name] = table[name]
    return GaussianCloud(positions, attrs, schema), trailing


def _parse_ascii_body(data, offset, n, props, row_dtype):
    table = np.empty(n, dtype=row_dtype)
    pos = offset
    for i in range(n):
        nl = data.find(b"\n", pos)
        line = data[pos:] if nl < 0 else data[pos:nl]
        if nl < 0 and not line.strip():
            raise TruncatedPayload(f"expected {n} vertex lines, found {i}")
        pos = len(data) if nl < 0 else nl + 1
        tok = line.split()
        if len(tok) < len(props):
            raise TruncatedPayload(f"vertex line {i} has {len(tok)} of {len(props)} values")
        row = []
        for (name, dtype), t in zip(props, tok):
            try:
                row.append(float(t) if dtype.startswith("float") else int(t))
            except ValueError:
                raise MalformedHeader(f"vertex {i}: bad {dtype} value {t!r}") from None
        table[i] = tuple(row)
    return table, pos


def parse_ply(data: bytes) -> GaussianCloud:
    """Parse a PLY byte string into a GaussianCloud.

    Bytes after the last declared vertex are not consumed; their presence is logged.
    """
    cloud, trailing = split_ply(data)
    if trailing.strip(b"\r\n\t "):
        log.warning("ignoring %d trailing bytes after vertex data", len(trailing))
    return cloud


def _ascii_token(value, dtype: str) -> str:
    if dtype == "float32":
        return np.format_float_positional(np.float32(value), unique=True, trim="-")
    if dtype == "float64":
        return repr(float(value))
    return str(int(value))


def write_ply(cloud: GaussianCloud, mode: str = "binary_le") -> bytes:
    """Serialize ``cloud`` as PLY; x, y, z come first, then schema channels in order."""
    if mode not in ("ascii", "binary_le"):
        raise ValueError(f"unknown PLY mode {mode!r}")
    pos_dtype = "float64" if cloud.positions.dtype == np.float64 else "float32"
    props = [(a, pos_dtype) for a in POSITION_NAMES] + list(cloud.schema.channels)

    header = ["ply", "format " + ("ascii" if mode == "ascii" else "binary_little_endian") + " 1.0"]
    header.append(f"element vertex {cloud.n}")
    header += [f"property {DTYPES[dt][1]} {name}" for name, dt in props]
    header.append("end_header")
    head = ("\n".join(header) + "\n").encode("ascii")

    row_dtype = np.dtype([(name, DTYPES[dt][0]) for name, dt in props])
    table = np.empty(cloud.n, dtype=row_dtype)
    for i, a in enumerate(POSITION_NAMES):
        table[a] = cloud.positions[:, i]
    for name in cloud.schema.names:
        table[name] = cloud.attributes[name]

    if mode == "binary_le":
        return head + table.tobytes()
    lines = []
    columns = [(table[name], dt) for name, dt in props]
    for i in range(cloud.n):
        lines.append(" ".join(_ascii_token(col[i], dt) for col, dt in columns))
    body = ("\n".join(lines) + "\n") if lines else ""
    return head + body.encode("ascii")


def read_ply(path) -> GaussianCloud:
    return parse_ply(Path(path).read_bytes())


def save_ply(cloud: GaussianCloud, path, mode: str = "binary_le") -> None:
    Path(path).write_bytes(write_ply(cloud, mode))
