"""Binary tensor files (PNST) and binary PGM masks.

PNST layout: ``b"PNST"``, u8 version (1), u8 dtype (0 float32, 1 float64),
u8 rank, u8 zero pad, ``rank`` little-endian u64 extents, then the
row-major little-endian payload.
"""
from __future__ import annotations

import os
import struct

import numpy as np

__all__ = ["FormatError", "read_tensor", "write_tensor", "read_mask_pgm", "write_mask_pgm"]

MAGIC = b"PNST"
VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


class FormatError(ValueError):
    """A file does not follow the expected binary layout."""


def write_tensor(path, tensor: np.ndarray) -> None:
    arr = np.asarray(tensor)
    code = _CODES.get(arr.dtype)
    if code is None:
        raise TypeError(f"PNST stores float32 or float64 only, got {arr.dtype}")
    if not 1 <= arr.ndim <= 5:
        raise ValueError(f"PNST rank must be 1..5, got {arr.ndim}")
    header = MAGIC + struct.pack("<BBBB", VERSION, code, arr.ndim, 0)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    payload = np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes()
    with open(path, "wb") as fh:
        fh.write(header + payload)


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 8:
        raise FormatError(f"{path}: truncated header at offset {len(raw)}")
    if raw[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r} at offset 0")
    version, code, rank, _pad = struct.unpack_from("<BBBB", raw, 4)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version} at offset 4")
    if code not in _DTYPES:
        raise FormatError(f"{path}: unknown dtype code {code} at offset 5")
    if not 1 <= rank <= 5:
        raise FormatError(f"{path}: invalid rank {rank} at offset 6")
    end = 8 + 8 * rank
    if len(raw) < end:
        raise FormatError(f"{path}: truncated header at offset {len(raw)}")
    shape = struct.unpack_from(f"<{rank}Q", raw, 8)
    if 0 in shape:
        raise FormatError(f"{path}: zero extent in shape {shape} at offset 8")
    dtype = _DTYPES[code]
    nbytes = int(np.prod(shape)) * dtype.itemsize
    if len(raw) - end != nbytes:
        raise FormatError(
            f"{path}: payload is {len(raw) - end} bytes at offset {end}, expected {nbytes}"
        )
    data = np.frombuffer(raw, dtype=dtype, offset=end).reshape(shape)
    return data.astype(dtype.newbyteorder("="))


def write_mask_pgm(path, mask: np.ndarray) -> None:
    """Write a 2-D binary mask as a P5 PGM with values 0/255."""
    m = np.asarray(mask)
    if m.ndim == 3 and m.shape[-1] == 1:
        m = m[..., 0]
    if m.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {m.shape}")
    h, w = m.shape
    pixels = np.where(m > 0.5, 255, 0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def _pgm_token(raw: bytes, pos: int, path) -> tuple[bytes, int]:
    n = len(raw)
    while pos < n:
        if raw[pos:pos + 1] == b"#":
            while pos < n and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif raw[pos:pos + 1].isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not raw[pos:pos + 1].isspace():
        pos += 1
    if start == pos:
        raise FormatError(f"{path}: truncated header at offset {start}")
    return raw[start:pos], pos


def read_mask_pgm(path) -> np.ndarray:
    """Read a P5 PGM (maxval 255) into a boolean [H, W] mask (pixel >= 128)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if not raw:
        raise FormatError(f"{path}: truncated header at offset 0")
    magic, pos = _pgm_token(raw, 0, path)
    if magic != b"P5":
        raise FormatError(f"{path}: bad magic {magic!r} at offset 0")
    fields = []
    for _ in range(3):
        start = pos
        tok, pos = _pgm_token(raw, pos, path)
        if not tok.isdigit():
            raise FormatError(f"{path}: non-numeric header field {tok!r} at offset {start}")
        fields.append(int(tok))
    w, h, maxval = fields
    if maxval != 255:
        raise FormatError(f"{path}: maxval {maxval} is not 255 (header ends at offset {pos})")
    if pos >= len(raw) or not raw[pos:pos + 1].isspace():
        raise FormatError(f"{path}: truncated header at offset {pos}")
    pos += 1
    if len(raw) - pos < w * h:
        raise FormatError(f"{path}: truncated pixel data at offset {len(raw)}, expected {w * h} bytes from {pos}")
    pixels = np.frombuffer(raw, dtype=np.uint8, count=w * h, offset=pos).reshape(h, w)
    return pixels >= 128


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return str(path)
