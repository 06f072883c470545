"""IGS2 binary container: a fixed header, float16 Gaussian records, float16 block corners.

Layout (little-endian)::

    magic "IGS2" | version u8 | flags u8 | k u16 | width u32 | height u32 | n_g u32 | n_b u32
    n_g x 8 float16  (mu_u, mu_v, theta, s1, s2, r, g, b)
    n_b x 4 float16  (x1, y1, x2, y2)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bsp import BspPartition, partition_from_blocks
from .gaussian import GaussianSet

MAGIC = b"IGS2"
VERSION = 1
HEADER = struct.Struct("<4sBBHIIII")
HEADER_BYTES = HEADER.size
GAUSSIAN_BYTES = 16
BLOCK_BYTES = 8
_F16 = np.dtype("<f2")


class CodecError(ValueError):
    pass


class BadMagicError(CodecError):
    pass


class UnsupportedVersionError(CodecError):
    pass


class TruncatedError(CodecError):
    pass


class EmptyPayloadError(CodecError):
    pass


class EncodeRangeError(CodecError):
    pass


@dataclass
class Decoded:
    gaussians: GaussianSet
    partition: Optional[BspPartition]
    width: int
    height: int
    k: int


@dataclass
class SizeReport:
    n_gaussians: int
    n_blocks: int
    width: int
    height: int

    @property
    def payload_bytes(self) -> int:
        return GAUSSIAN_BYTES * self.n_gaussians

    @property
    def block_bytes(self) -> int:
        return BLOCK_BYTES * self.n_blocks

    @property
    def header_bytes(self) -> int:
        return HEADER_BYTES

    @property
    def total_bytes(self) -> int:
        return self.header_bytes + self.payload_bytes + self.block_bytes

    @property
    def payload_kb(self) -> float:
        # decimal kilobytes
        return self.payload_bytes / 1000.0

    @property
    def bpp(self) -> float:
        return self.payload_bytes * 8 / (self.width * self.height)


def _to_f16(values: np.ndarray, what: str) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise EncodeRangeError(f"non-finite {what} values cannot be encoded")
    with np.errstate(over="ignore"):
        half = values.astype(_F16)
    if not np.all(np.isfinite(half)):
        raise EncodeRangeError(f"{what} values exceed the float16 range")
    return half


def quantize(gs: GaussianSet) -> GaussianSet:
    """Round every parameter through IEEE binary16 and re-apply the constraints."""
    half = _to_f16(gs.to_matrix(), "Gaussian")
    return GaussianSet.from_matrix(half.astype(np.float64)).constrained()


def quantize_partition(p: BspPartition, gs: GaussianSet) -> BspPartition:
    """The partition a decoder would rebuild after ``gs`` and ``p`` go through the codec.

    ``gs`` may be the original or the already quantized set; membership is
    always assigned from the quantized centres, as the decoder does.
    """
    return partition_from_blocks(_to_f16(p.blocks, "block").astype(np.float64), quantize(gs))


def encode(gs: GaussianSet, partition: Optional[BspPartition], width: int, height: int,
           k: int) -> bytes:
    if len(gs) == 0:
        raise EmptyPayloadError("cannot encode an empty Gaussian set")
    if partition is not None and partition.n_gaussians != len(gs):
        raise CodecError("partition was built for a different Gaussian set")
    n_b = 0 if partition is None else partition.n_blocks
    head = HEADER.pack(MAGIC, VERSION, 0, k, width, height, len(gs), n_b)
    body = _to_f16(gs.to_matrix(), "Gaussian").tobytes()
    blocks = b"" if partition is None else _to_f16(partition.blocks, "block").tobytes()
    return head + body + blocks


def read_header(data: bytes) -> dict:
    if len(data) < HEADER_BYTES:
        raise TruncatedError(f"file is {len(data)} bytes, header needs {HEADER_BYTES}")
    magic, version, flags, k, width, height, n_g, n_b = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported version {version}")
    return dict(version=version, flags=flags, k=k, width=width, height=height, n_g=n_g, n_b=n_b)


def decode(data: bytes) -> Decoded:
    h = read_header(data)
    n_g, n_b = h["n_g"], h["n_b"]
    if n_g == 0:
        raise EmptyPayloadError("file holds no Gaussians")
    expected = HEADER_BYTES + GAUSSIAN_BYTES * n_g + BLOCK_BYTES * n_b
    if len(data) < expected:
        raise TruncatedError(f"file is {len(data)} bytes, expected {expected}")
    if len(data) > expected:
        raise CodecError(f"{len(data) - expected} trailing bytes after payload")
    off = HEADER_BYTES
    params = np.frombuffer(data, dtype=_F16, count=8 * n_g, offset=off).astype(np.float64)
    gs = GaussianSet.from_matrix(params).constrained()
    partition = None
    if n_b:
        off += GAUSSIAN_BYTES * n_g
        corners = np.frombuffer(data, dtype=_F16, count=4 * n_b, offset=off).astype(np.float64)
        partition = partition_from_blocks(corners, gs)
    return Decoded(gs, partition, h["width"], h["height"], h["k"])


def size_report(n_gaussians: int, n_blocks: int, width: int, height: int) -> SizeReport:
    return SizeReport(n_gaussians, n_blocks, width, height)
