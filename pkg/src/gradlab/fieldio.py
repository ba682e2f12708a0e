"""Image and raw-field I/O.

Binary netpbm only: PGM (P5, one channel) and PPM (P6, three channels),
8-bit, mapped linearly to [0,1] on read and clamped-quantized on write.
The raw dump is little-endian float64 preceded by a 16-byte header
(magic "GDLF", u32 height, u32 width, u32 channels).
"""

from __future__ import annotations

import struct

import numpy as np

from .field import DimensionError, Field

__all__ = [
    "read_image",
    "read_pgm",
    "read_ppm",
    "write_pgm",
    "write_ppm",
    "read_raw",
    "write_raw",
]

_RAW_MAGIC = b"GDLF"


class ImageFormatError(ValueError):
    """Raised when a file is not the binary netpbm variant we support."""


def _read_header_tokens(buf: bytes, count: int, start: int) -> tuple[list[int], int]:
    """Pull ``count`` whitespace-separated integers from a netpbm header.

    Handles '#' comments, which run to end of line.  Returns the values and
    the offset one past the single whitespace byte that terminates the last
    token (the pixel data begins there).
    """
    values: list[int] = []
    i = start
    while len(values) < count:
        while i < len(buf) and buf[i : i + 1].isspace():
            i += 1
        if i < len(buf) and buf[i : i + 1] == b"#":
            while i < len(buf) and buf[i : i + 1] != b"\n":
                i += 1
            continue
        j = i
        while j < len(buf) and not buf[j : j + 1].isspace():
            j += 1
        if j == i:
            raise ImageFormatError("truncated netpbm header")
        try:
            values.append(int(buf[i:j]))
        except ValueError as e:
            raise ImageFormatError(f"bad header token {buf[i:j]!r}") from e
        i = j
    if i >= len(buf) or not buf[i : i + 1].isspace():
        raise ImageFormatError("missing whitespace after maxval")
    return values, i + 1


def _read_netpbm(path: str, magic: bytes, channels: int) -> Field:
    with open(path, "rb") as f:
        buf = f.read()
    if buf[:2] != magic:
        raise ImageFormatError(f"expected {magic.decode()} file, got {buf[:2]!r}")
    (width, height, maxval), offset = _read_header_tokens(buf, 3, 2)
    if width < 1 or height < 1:
        raise ImageFormatError(f"bad image dimensions {width}x{height}")
    if not 1 <= maxval <= 255:
        raise ImageFormatError(f"only 8-bit images supported, maxval={maxval}")
    n = height * width * channels
    raster = buf[offset : offset + n]
    if len(raster) != n:
        raise ImageFormatError(f"expected {n} raster bytes, got {len(raster)}")
    arr = np.frombuffer(raster, dtype=np.uint8).astype(np.float64) / maxval
    return Field._wrap(arr.reshape(height, width, channels))


def read_pgm(path: str) -> Field:
    """Read a binary PGM (P5) into a single-channel field in [0,1]."""
    return _read_netpbm(path, b"P5", 1)


def read_ppm(path: str) -> Field:
    """Read a binary PPM (P6) into a three-channel field in [0,1]."""
    return _read_netpbm(path, b"P6", 3)


def read_image(path: str) -> Field:
    """Read a PGM or PPM, dispatching on the magic bytes."""
    with open(path, "rb") as f:
        magic = f.read(2)
    if magic == b"P5":
        return read_pgm(path)
    if magic == b"P6":
        return read_ppm(path)
    raise ImageFormatError(f"unsupported image magic {magic!r}")


def _quantize(x: Field) -> np.ndarray:
    v = np.clip(x.data, 0.0, 1.0)
    return np.rint(v * 255.0).astype(np.uint8)


def write_pgm(path: str, x: Field) -> None:
    """Write a single-channel field as binary PGM, clamped to [0,1]."""
    if x.channels != 1:
        raise DimensionError(f"PGM needs 1 channel, field has {x.channels}")
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (x.width, x.height))
        f.write(_quantize(x).tobytes())


def write_ppm(path: str, x: Field) -> None:
    """Write a three-channel field as binary PPM, clamped to [0,1]."""
    if x.channels != 3:
        raise DimensionError(f"PPM needs 3 channels, field has {x.channels}")
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (x.width, x.height))
        f.write(_quantize(x).tobytes())


def write_raw(path: str, x: Field) -> None:
    """Dump a field as little-endian float64 with a GDLF header."""
    with open(path, "wb") as f:
        f.write(_RAW_MAGIC)
        f.write(struct.pack("<III", x.height, x.width, x.channels))
        f.write(x.data.astype("<f8").tobytes())


def read_raw(path: str) -> Field:
    """Read a GDLF raw dump back into a field."""
    with open(path, "rb") as f:
        buf = f.read()
    if buf[:4] != _RAW_MAGIC:
        raise ImageFormatError(f"bad raw magic {buf[:4]!r}")
    h, w, c = struct.unpack("<III", buf[4:16])
    n = h * w * c
    body = buf[16 : 16 + 8 * n]
    if len(body) != 8 * n:
        raise ImageFormatError(f"expected {8 * n} payload bytes, got {len(body)}")
    arr = np.frombuffer(body, dtype="<f8").astype(np.float64).reshape(h, w, c)
    return Field(arr)
