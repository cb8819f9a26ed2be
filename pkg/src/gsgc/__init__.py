"""Lossless octree geometry codec for 3D Gaussian-splat point clouds."""

from .cloud import GAUSSIAN_3DGS_CHANNELS, AttributeSchema, GaussianCloud
from .container import CodedFrame, FrameHeader, read_frame, write_frame
from .errors import CodecError
from .morton import apply_permutation, morton_decode, morton_encode, sort_permutation
from .pipeline import EncodeConfig, decode_cloud, encode_cloud, verify_alignment
from .ply_io import parse_ply, read_ply, save_ply, write_ply
from .voxel_grid import GridParams, dequantize, fit_grid, quantize

__version__ = "0.1.0"

__all__ = [
    "AttributeSchema",
    "CodecError",
    "CodedFrame",
    "EncodeConfig",
    "FrameHeader",
    "GAUSSIAN_3DGS_CHANNELS",
    "GaussianCloud",
    "GridParams",
    "apply_permutation",
    "decode_cloud",
    "dequantize",
    "encode_cloud",
    "fit_grid",
    "morton_decode",
    "morton_encode",
    "parse_ply",
    "quantize",
    "read_frame",
    "read_ply",
    "save_ply",
    "sort_permutation",
    "verify_alignment",
    "write_frame",
    "write_ply",
]
