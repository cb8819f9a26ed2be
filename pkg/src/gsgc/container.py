"""The ``.gsgc`` coded-frame format.

All multi-byte fields are little-endian::

    magic        4s   b"GSGC"
    version      u8   1
    flags        u8   bit0 lossless integer grid, bit1 duplicates present,
                      bit2 positions were float64 (otherwise float32)
    depth        u8   1..21
    reserved     u8   0
    point_count  u64
    origin       3 x f64
    step         f64
    n_channels   u16
    per channel: u8 name length, ASCII name, u8 dtype code
                 (0 float32, 1 float64, 2 uint8, 3 int32)
    geometry     u64 length + range-coded occupancy payload
    attributes   u64 length + raw rows (schema dtypes, row-major, Morton order)
    crc32        u32  CRC-32 (reflected 0xEDB88320) of geometry || attributes

See docs/format.md for the byte-level walkthrough.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

from .cloud import DTYPE_BY_CODE, DTYPES, AttributeSchema
from .errors import BadMagic, CodecError, LengthMismatch, UnsupportedVersion, ChecksumMismatch
from .morton import MAX_DEPTH

MAGIC = b"GSGC"
VERSION = 1
FLAG_LOSSLESS = 0x01
FLAG_DUPLICATES = 0x02
FLAG_FLOAT64_POSITIONS = 0x04
KNOWN_FLAGS = FLAG_LOSSLESS | FLAG_DUPLICATES | FLAG_FLOAT64_POSITIONS

_FIXED = struct.Struct("<4sBBBBQ3ddH")
FIXED_HEADER_SIZE = _FIXED.size  # 50
_U64 = struct.Struct("<Q")
_U32 = struct.Struct("<I")


@dataclass
class FrameHeader:
    depth: int
    point_count: int
    origin: tuple[float, float, float]
    step: float
    schema: AttributeSchema = field(default_factory=AttributeSchema)
    flags: int = 0
    version: int = VERSION

    def __post_init__(self):
        self.origin = tuple(float(o) for o in self.origin)
        self.step = float(self.step)
        self.depth = int(self.depth)
        self.point_count = int(self.point_count)

    @property
    def lossless(self) -> bool:
        return bool(self.flags & FLAG_LOSSLESS)

    @property
    def duplicates(self) -> bool:
        return bool(self.flags & FLAG_DUPLICATES)

    @property
    def float64_positions(self) -> bool:
        return bool(self.flags & FLAG_FLOAT64_POSITIONS)

    def validate(self):
        if self.version != VERSION:
            raise UnsupportedVersion(f"unsupported container version {self.version}")
        if not 1 <= self.depth <= MAX_DEPTH:
            raise CodecError(f"depth out of range: {self.depth}")
        if not self.step > 0:
            raise CodecError(f"grid step must be positive, got {self.step}")
        if self.flags & ~KNOWN_FLAGS:
            raise CodecError(f"unknown header flags 0x{self.flags:02x}")

    def to_bytes(self) -> bytes:
        self.validate()
        parts = [
            _FIXED.pack(
                MAGIC, self.version, self.flags, self.depth, 0, self.point_count,
                *self.origin, self.step, len(self.schema),
            )
        ]
        for name, dtype in self.schema.channels:
            raw = name.encode("ascii")
            parts.append(struct.pack("<B", len(raw)) + raw + struct.pack("<B", DTYPES[dtype][2]))
        return b"".join(parts)


@dataclass
class CodedFrame:
    header: FrameHeader
    geometry: bytes
    attributes: bytes

    def __post_init__(self):
        self.geometry = bytes(self.geometry)
        self.attributes = bytes(self.attributes)

    @property
    def checksum(self) -> int:
        return zlib.crc32(self.attributes, zlib.crc32(self.geometry))

    def check(self):
        self.header.validate()
        expect = self.header.point_count * self.header.schema.row_width
        if len(self.attributes) != expect:
            raise LengthMismatch(
                f"attribute payload is {len(self.attributes)} bytes, expected "
                f"{self.header.point_count} x {self.header.schema.row_width} = {expect}"
            )


def write_frame(frame: CodedFrame) -> bytes:
    frame.check()
    return b"".join([
        frame.header.to_bytes(),
        _U64.pack(len(frame.geometry)), frame.geometry,
        _U64.pack(len(frame.attributes)), frame.attributes,
        _U32.pack(frame.checksum),
    ])


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if n > len(self.data) - self.pos:
            raise LengthMismatch(
                f"{what} needs {n} bytes at offset {self.pos}, only {len(self.data) - self.pos} left"
            )
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, st: struct.Struct, what: str):
        return st.unpack(self.take(st.size, what))


def read_header(r: _Reader) -> FrameHeader:
    if r.data[:4] != MAGIC:
        raise BadMagic(f"bad magic {bytes(r.data[:4])!r}, expected {MAGIC!r}")
    magic, version, flags, depth, reserved, count, ox, oy, oz, step, n_ch = r.unpack(_FIXED, "header")
    if version != VERSION:
        raise UnsupportedVersion(f"unsupported container version {version}")
    if reserved != 0:
        raise CodecError(f"reserved header byte is {reserved}, expected 0")
    channels = []
    for _ in range(n_ch):
        (length,) = r.take(1, "channel name length")
        try:
            name = r.take(length, "channel name").decode("ascii")
        except UnicodeDecodeError:
            raise CodecError("channel name is not ASCII") from None
        (code,) = r.take(1, "channel dtype")
        if code not in DTYPE_BY_CODE:
            raise CodecError(f"unknown dtype code {code} for channel {name!r}")
        channels.append((name, DTYPE_BY_CODE[code]))
    header = FrameHeader(depth, count, (ox, oy, oz), step, AttributeSchema(tuple(channels)), flags, version)
    header.validate()
    return header


def read_frame(data: bytes) -> CodedFrame:
    """Parse and validate a serialized frame (magic, version, lengths, then CRC)."""
    r = _Reader(bytes(data))
    header = read_header(r)
    (geo_len,) = r.unpack(_U64, "geometry length")
    geometry = r.take(geo_len, "geometry payload")
    (attr_len,) = r.unpack(_U64, "attribute length")
    expect = header.point_count * header.schema.row_width
    if attr_len != expect:
        raise LengthMismatch(
            f"attribute length {attr_len} != {header.point_count} points x "
            f"{header.schema.row_width} bytes"
        )
    attributes = r.take(attr_len, "attribute payload")
    (crc,) = r.unpack(_U32, "checksum")
    if r.pos != len(r.data):
        raise LengthMismatch(f"{len(r.data) - r.pos} unexpected bytes after the checksum")
    frame = CodedFrame(header, geometry, attributes)
    if frame.checksum != crc:
        raise ChecksumMismatch(f"checksum mismatch: stored {crc:08x}, computed {frame.checksum:08x}")
    return frame
