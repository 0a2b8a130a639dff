"""Binary containers for tensors, optical flow and masks.

Tensors live in memory as float64 ``numpy`` arrays (rank 1-3, channel-major
``[C, H, W]`` for stacks) and are stored on disk as little-endian float32 in
the ``SGT1`` container.  Flow uses the Middlebury ``.flo`` layout and masks use
binary PGM (``P5``) with 0/255 payload bytes.
"""
from __future__ import annotations

import io
import os
import struct
from dataclasses import dataclass
from typing import BinaryIO

import numpy as np

TENSOR_MAGIC = b"SGT1"
FLO_MAGIC = 202021.25


class FormatError(ValueError):
    """Raised when a file does not follow its container format."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class FlowField:
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.float64)
        v = np.asarray(self.v, dtype=np.float64)
        if u.ndim != 2 or u.shape != v.shape:
            raise ValueError("flow components must be 2-D arrays of equal shape")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise ValueError("flow values must be finite")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def height(self) -> int:
        return self.u.shape[0]

    @property
    def width(self) -> int:
        return self.u.shape[1]


def as_tensor(data) -> np.ndarray:
    t = np.ascontiguousarray(data, dtype=np.float64)
    if t.ndim not in (1, 2, 3):
        raise ValueError(f"tensor rank must be 1, 2 or 3, got {t.ndim}")
    if 0 in t.shape:
        raise ValueError("tensor extents must be positive")
    return t


def _read_exact(source: BinaryIO, n: int, field: str) -> bytes:
    if n > 1 << 20 and source.seekable():
        # refuse to allocate for a size the stream cannot hold
        pos = source.tell()
        end = source.seek(0, io.SEEK_END)
        source.seek(pos)
        if end - pos < n:
            raise FormatError(field, f"truncated: expected {n} bytes, got {end - pos}")
    buf = source.read(n)
    if buf is None or len(buf) != n:
        got = 0 if buf is None else len(buf)
        raise FormatError(field, f"truncated: expected {n} bytes, got {got}")
    return buf


# -- SGT1 tensors -----------------------------------------------------------

def write_tensor(t, sink: BinaryIO) -> None:
    t = as_tensor(t)
    sink.write(TENSOR_MAGIC)
    sink.write(struct.pack("<I", t.ndim))
    sink.write(struct.pack(f"<{t.ndim}I", *t.shape))
    sink.write(t.astype("<f4").tobytes(order="C"))


def read_tensor(source: BinaryIO) -> np.ndarray:
    magic = _read_exact(source, 4, "magic")
    if magic != TENSOR_MAGIC:
        raise FormatError("magic", f"expected {TENSOR_MAGIC!r}, got {magic!r}")
    (rank,) = struct.unpack("<I", _read_exact(source, 4, "rank"))
    if rank not in (1, 2, 3):
        raise FormatError("rank", f"must be 1, 2 or 3, got {rank}")
    dims = struct.unpack(f"<{rank}I", _read_exact(source, 4 * rank, "dims"))
    if any(d == 0 for d in dims):
        raise FormatError("dims", f"zero extent in {dims}")
    count = int(np.prod(dims, dtype=np.int64))
    payload = _read_exact(source, 4 * count, "payload")
    return np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(dims)


def save_tensor(path: str | os.PathLike, t) -> None:
    with open(path, "wb") as f:
        write_tensor(t, f)


def load_tensor(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as f:
        return read_tensor(f)


# -- Middlebury .flo --------------------------------------------------------

def write_flo(flow: FlowField, sink: BinaryIO) -> None:
    sink.write(struct.pack("<f", FLO_MAGIC))
    sink.write(struct.pack("<ii", flow.width, flow.height))
    uv = np.stack([flow.u, flow.v], axis=-1).astype("<f4")
    sink.write(uv.tobytes(order="C"))


def read_flo(source: BinaryIO) -> FlowField:
    (magic,) = struct.unpack("<f", _read_exact(source, 4, "magic"))
    if magic != FLO_MAGIC:
        raise FormatError("magic", f"expected {FLO_MAGIC}, got {magic}")
    width, height = struct.unpack("<ii", _read_exact(source, 8, "dims"))
    if width <= 0 or height <= 0:
        raise FormatError("dims", f"nonpositive size {width}x{height}")
    payload = _read_exact(source, 8 * width * height, "payload")
    uv = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(height, width, 2)
    if not np.all(np.isfinite(uv)):
        raise FormatError("payload", "non-finite flow value")
    return FlowField(uv[..., 0], uv[..., 1])


def save_flo(path: str | os.PathLike, flow: FlowField) -> None:
    with open(path, "wb") as f:
        write_flo(flow, f)


def load_flo(path: str | os.PathLike) -> FlowField:
    with open(path, "rb") as f:
        return read_flo(f)


# -- binary PGM masks -------------------------------------------------------

def write_pgm_mask(mask, sink: BinaryIO) -> None:
    m = np.asarray(mask, dtype=bool)
    if m.ndim != 2:
        raise ValueError("mask must be 2-D")
    h, w = m.shape
    sink.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
    sink.write(np.where(m, 255, 0).astype(np.uint8).tobytes())


def _pgm_token(source: BinaryIO, field: str) -> bytes:
    # Whitespace-separated header token; '#' comments are skipped.
    tok = b""
    while True:
        c = source.read(1)
        if not c:
            if tok:
                return tok
            raise FormatError(field, "truncated header")
        if c == b"#" and not tok:
            while c not in (b"\n", b""):
                c = source.read(1)
            continue
        if c.isspace():
            if tok:
                return tok
            continue
        tok += c
        if len(tok) > 16:
            raise FormatError(field, "header token too long")


def _pgm_int(source: BinaryIO, field: str) -> int:
    tok = _pgm_token(source, field)
    if not tok.isdigit():
        raise FormatError(field, f"not a decimal integer: {tok!r}")
    return int(tok)


def read_pgm_mask(source: BinaryIO) -> np.ndarray:
    magic = _read_exact(source, 2, "magic")
    if magic != b"P5":
        raise FormatError("magic", f"expected b'P5', got {magic!r}")
    w = _pgm_int(source, "width")
    h = _pgm_int(source, "height")
    maxval = _pgm_int(source, "maxval")
    if w <= 0 or h <= 0:
        raise FormatError("dims", f"nonpositive size {w}x{h}")
    if maxval != 255:
        raise FormatError("maxval", f"must be 255, got {maxval}")
    payload = _read_exact(source, w * h, "payload")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w) >= 128


def save_mask(path: str | os.PathLike, mask) -> None:
    with open(path, "wb") as f:
        write_pgm_mask(mask, f)


def load_mask(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as f:
        return read_pgm_mask(f)


def tensor_bytes(t) -> bytes:
    buf = io.BytesIO()
    write_tensor(t, buf)
    return buf.getvalue()
