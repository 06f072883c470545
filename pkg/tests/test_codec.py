import struct

import numpy as np
import pytest

from conftest import random_set
from oracles import binary16
from splatcodec.bsp import build_partition, render_image_blocked
from splatcodec.codec import (
    HEADER_BYTES,
    BadMagicError,
    EmptyPayloadError,
    TruncatedError,
    UnsupportedVersionError,
    decode,
    encode,
    quantize,
    quantize_partition,
    read_header,
    size_report,
)
from splatcodec.gaussian import GaussianSet
from splatcodec.render import render_image


def test_header_layout(rng):
    gs = random_set(rng, 3)
    data = encode(gs, None, 640, 480, 10)
    # magic + u8 + u8 + u16 + 4 x u32
    assert HEADER_BYTES == 24
    assert data[:4] == b"IGS2"
    assert struct.unpack("<BBHIIII", data[4:24]) == (1, 0, 10, 640, 480, 3, 0)
    assert read_header(data)["n_g"] == 3


def test_length_formula_fuzz():
    rng = np.random.default_rng(99)
    for _ in range(100):
        n = int(rng.integers(1, 400))
        gs = random_set(rng, n)
        p = build_partition(gs, int(rng.integers(1, 50))) if rng.random() < 0.7 else None
        n_b = 0 if p is None else p.n_blocks
        data = encode(gs, p, 64, 64, 10)
        assert len(data) == HEADER_BYTES + 16 * n + 8 * n_b
        assert read_header(data)["n_b"] == n_b


def test_8k_payload_and_bpp(rng):
    gs = random_set(rng, 8000)
    data = encode(gs, None, 2048, 2048, 10)
    assert len(data) - HEADER_BYTES == 128_000
    rep = size_report(8000, 0, 2048, 2048)
    assert rep.payload_bytes == 128_000 and rep.payload_kb == 128.0
    assert rep.bpp == pytest.approx(0.244, abs=5e-4)


def test_1k_payload_and_bpp():
    rep = size_report(1000, 0, 2048, 2048)
    assert rep.payload_bytes == 16_000
    assert rep.bpp == pytest.approx(0.0305, abs=1e-4)
    assert round(rep.bpp, 3) == 0.031


def test_block_overhead_is_8_bytes_per_block(rng):
    gs = random_set(rng, 8000)
    p = build_partition(gs, 64)
    rep = size_report(8000, p.n_blocks, 2048, 2048)
    assert rep.block_bytes == 8 * p.n_blocks
    assert len(encode(gs, p, 2048, 2048, 10)) == rep.total_bytes


def test_reencode_is_byte_identical(rng):
    gs = random_set(rng, 500)
    p = build_partition(gs, 32)
    a = encode(gs, p, 300, 200, 10)
    d = decode(a)
    b = encode(d.gaussians, d.partition, d.width, d.height, d.k)
    assert a == b
    assert (d.width, d.height, d.k) == (300, 200, 10)


def test_roundtrip_equals_binary16_oracle(rng):
    gs = random_set(rng, 200)
    d = decode(encode(gs, None, 32, 32, 10))
    expected = np.vectorize(binary16)(gs.to_matrix())
    np.testing.assert_array_equal(d.gaussians.to_matrix(), expected)


def test_decode_applies_constraints():
    gs = GaussianSet(np.array([[0.5, 0.5]]), np.array([3.1415]), np.array([[1e-4, 2.0]]),
                     np.array([[0.0, 1.0, 0.5]]))
    d = decode(encode(gs, None, 8, 8, 10))
    g = d.gaussians[0]
    assert 0.0 <= g.theta < np.pi
    assert all(1e-4 <= s <= 2.0 for s in g.scale)


def test_truncation_rejected(rng):
    data = encode(random_set(rng, 10), None, 8, 8, 10)
    with pytest.raises(TruncatedError):
        decode(data[:-1])
    with pytest.raises(TruncatedError):
        decode(data[:10])


def test_bad_magic_and_version(rng):
    data = bytearray(encode(random_set(rng, 2), None, 8, 8, 10))
    bad = bytes(b"XGS2" + data[4:])
    with pytest.raises(BadMagicError):
        decode(bad)
    data[4] = 2
    with pytest.raises(UnsupportedVersionError):
        decode(bytes(data))


def test_zero_gaussians_rejected():
    data = struct.pack("<4sBBHIIII", b"IGS2", 1, 0, 10, 8, 8, 0, 0)
    with pytest.raises(EmptyPayloadError):
        decode(data)
    with pytest.raises(EmptyPayloadError):
        encode(GaussianSet.empty(), None, 8, 8, 10)


def test_decoded_render_matches_quantized_render(rng):
    gs = random_set(rng, 300, scale=(0.01, 0.05))
    p = build_partition(gs, 20)
    d = decode(encode(gs, p, 48, 40, 10))
    q = quantize(gs)
    np.testing.assert_array_equal(render_image(d.gaussians, 48, 40), render_image(q, 48, 40))
    qp = quantize_partition(p, q)
    np.testing.assert_array_equal(render_image_blocked(d.gaussians, d.partition, 48, 40),
                                  render_image_blocked(q, qp, 48, 40))


def test_decoded_partition_shells_from_corners(rng):
    gs = random_set(rng, 400)
    p = build_partition(gs, 25)
    d = decode(encode(gs, p, 64, 64, 10))
    assert d.partition.n_blocks == p.n_blocks
    mu = d.gaussians.means
    for k in range(d.partition.n_blocks):
        s = d.partition.shells[k]
        inside = np.flatnonzero((mu[:, 0] >= s[0]) & (mu[:, 0] <= s[2]) & (mu[:, 1] >= s[1]) & (mu[:, 1] <= s[3]))
        np.testing.assert_array_equal(d.partition.shell(k), inside)


def test_quantize_partition_accepts_original_set(rng):
    gs = random_set(rng, 2000, scale=(0.005, 0.05))
    p = build_partition(gs, 32)
    dec = decode(encode(gs, p, 64, 64, 10))
    for src in (gs, quantize(gs)):
        qp = quantize_partition(p, src)
        assert all(np.array_equal(a, b) for a, b in zip(qp.members, dec.partition.members))
