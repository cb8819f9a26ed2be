"""In-memory Gaussian point cloud: positions plus an opaque attribute table."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidCloud, NonFiniteCoordinate

# dtype name -> (numpy little-endian dtype, PLY type name, container dtype code)
DTYPES = {
    "float32": ("<f4", "float", 0),
    "float64": ("<f8", "double", 1),
    "uint8": ("u1", "uchar", 2),
    "int32": ("<i4", "int", 3),
}
DTYPE_BY_CODE = {code: name for name, (_, _, code) in DTYPES.items()}
POSITION_NAMES = ("x", "y", "z")

# Non-position channels of the reference 3DGS export (56 channels; exporters
# that also write nx, ny, nz produce 59).
GAUSSIAN_3DGS_CHANNELS = (
    [f"f_dc_{i}" for i in range(3)]
    + [f"f_rest_{i}" for i in range(45)]
    + ["opacity"]
    + [f"scale_{i}" for i in range(3)]
    + [f"rot_{i}" for i in range(4)]
)


@dataclass(frozen=True)
class AttributeSchema:
    """Ordered (name, dtype) pairs, one per non-position channel."""

    channels: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        channels = tuple((str(n), str(d)) for n, d in self.channels)
        object.__setattr__(self, "channels", channels)
        seen = set()
        for name, dtype in channels:
            if not name or not name.isascii() or any(c.isspace() for c in name):
                raise InvalidCloud(f"invalid channel name {name!r}")
            if len(name) > 255:
                raise InvalidCloud(f"channel name too long: {name[:32]!r}...")
            if name in POSITION_NAMES:
                raise InvalidCloud(f"position channel {name!r} cannot be an attribute")
            if name in seen:
                raise InvalidCloud(f"duplicate channel {name!r}")
            if dtype not in DTYPES:
                raise InvalidCloud(f"unsupported dtype {dtype!r} for channel {name!r}")
            seen.add(name)

    @classmethod
    def uniform(cls, names, dtype="float32") -> AttributeSchema:
        return cls(tuple((n, dtype) for n in names))

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.channels]

    def __len__(self):
        return len(self.channels)

    def numpy_dtype(self) -> np.dtype:
        """Packed little-endian structured dtype for one attribute row."""
        return np.dtype([(n, DTYPES[d][0]) for n, d in self.channels])

    @property
    def row_width(self) -> int:
        return self.numpy_dtype().itemsize


@dataclass(eq=False)
class GaussianCloud:
    """N points: an (N, 3) position array and an N-row structured attribute table.

    Row i of ``attributes`` belongs to point i.  Equality is bit-exact.
    """

    positions: np.ndarray
    attributes: np.ndarray = None
    schema: AttributeSchema = field(default_factory=AttributeSchema)

    def __post_init__(self):
        pos = np.asarray(self.positions)
        if pos.ndim != 2 or pos.shape[1] != 3:
            if pos.size == 0:
                pos = pos.reshape(0, 3)
            else:
                raise InvalidCloud(f"positions must be N x 3, got shape {pos.shape}")
        if pos.dtype not in (np.float32, np.float64):
            pos = pos.astype(np.float64)
        pos = pos.astype(pos.dtype.newbyteorder("<"), copy=False)
        if not np.isfinite(pos).all():
            raise NonFiniteCoordinate("positions contain NaN or Inf")
        self.positions = pos

        dtype = self.schema.numpy_dtype()
        if self.attributes is None:
            self.attributes = np.zeros(len(pos), dtype=dtype)
        attrs = np.asarray(self.attributes)
        if attrs.dtype != dtype:
            try:
                attrs = attrs.astype(dtype, casting="equiv")
            except TypeError:
                raise InvalidCloud(
                    f"attribute dtype {attrs.dtype} does not match schema {dtype}"
                ) from None
        if attrs.shape != (len(pos),):
            raise InvalidCloud(
                f"{len(pos)} positions but attribute table shape {attrs.shape}"
            )
        self.attributes = attrs

    def __len__(self):
        return len(self.positions)

    @property
    def n(self) -> int:
        return len(self.positions)

    def __eq__(self, other):
        if not isinstance(other, GaussianCloud):
            return NotImplemented
        return (
            self.schema == other.schema
            and self.positions.dtype == other.positions.dtype
            and self.positions.shape == other.positions.shape
            and self.positions.tobytes() == other.positions.tobytes()
            and self.attributes.tobytes() == other.attributes.tobytes()
        )

    def __repr__(self):
        return (
            f"GaussianCloud(n={self.n}, positions={self.positions.dtype}, "
            f"channels={len(self.schema)})"
        )

    def take(self, index) -> GaussianCloud:
        """Rows ``index`` of both positions and attributes, kept in lockstep."""
        return GaussianCloud(self.positions[index], self.attributes[index], self.schema)
