"""Raster and edge-map file I/O.

Rasters are 8-bit PNG, PGM (P5), or PPM (P6); loading scales to [0, 1] as
``v / 255`` and saving clips then quantizes with round-half-up, so a
load/save round trip of 8-bit data is bit-identical.

Edge maps use the EGMP container: 4-byte magic ``EGMP``, one version byte
(0x01), rows and cols as 4-byte little-endian unsigned integers, then
rows * cols little-endian IEEE-754 single-precision values in row-major
order.  The payload is signed and round trips bit-exactly.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

__all__ = [
    "FormatError",
    "load_image",
    "save_image",
    "save_edge_map",
    "load_edge_map",
    "EDGE_MAP_MAGIC",
    "EDGE_MAP_VERSION",
]

EDGE_MAP_MAGIC = b"EGMP"
EDGE_MAP_VERSION = 1
_HEADER = struct.Struct("<4sBII")


class FormatError(ValueError):
    """Unsupported, malformed, or truncated image/edge-map file."""


def _quantize(img: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    return np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def _read_pnm_header(data: bytes, path) -> tuple[bytes, int, int, int]:
    # magic, width, height, maxval; '#' comments allowed between tokens
    tokens = []
    pos = 2
    magic = data[:2]
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated header")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as err:
        raise FormatError(f"{path}: bad header token") from err
    if maxval != 255:
        raise FormatError(f"{path}: only 8-bit (maxval 255) supported, got {maxval}")
    return magic, width, height, pos


def _load_pnm(path: Path) -> np.ndarray:
    data = path.read_bytes()
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"{path}: not a binary PGM/PPM file")
    _, width, height, offset = _read_pnm_header(data, path)
    channels = 1 if magic == b"P5" else 3
    need = width * height * channels
    payload = data[offset : offset + need]
    if len(payload) != need:
        raise FormatError(f"{path}: truncated payload ({len(payload)} of {need} bytes)")
    arr = np.frombuffer(payload, dtype=np.uint8).astype(float) / 255.0
    if channels == 1:
        return arr.reshape(height, width)
    return arr.reshape(height, width, 3)


def load_image(path) -> np.ndarray:
    """Load an 8-bit raster as float64 in [0, 1]; ``(m, n)`` for grayscale,
    ``(m, n, 3)`` for color."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    suffix = path.suffix.lower()
    if suffix in (".pgm", ".ppm"):
        return _load_pnm(path)
    if suffix == ".png":
        try:
            with Image.open(path) as img:
                if img.mode not in ("L", "RGB"):
                    img = img.convert("RGB" if "A" in img.mode or img.mode == "P" else "L")
                arr = np.asarray(img, dtype=float) / 255.0
        except (UnidentifiedImageError, OSError, SyntaxError) as err:
            raise FormatError(f"{path}: unreadable PNG ({err})") from err
        return arr
    raise FormatError(f"{path}: unsupported image format {suffix!r}")


def save_image(img: np.ndarray, path) -> None:
    """Quantize to 8 bits (clip, round half up) and write PNG/PGM/PPM."""
    path = Path(path)
    img = np.asarray(img, dtype=float)
    q = _quantize(img)
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        if q.ndim != 2:
            raise ValueError("PGM stores grayscale images only")
        path.write_bytes(b"P5\n%d %d\n255\n" % (q.shape[1], q.shape[0]) + q.tobytes())
        return
    if suffix == ".ppm":
        if q.ndim != 3 or q.shape[2] != 3:
            raise ValueError("PPM stores 3-channel images only")
        path.write_bytes(b"P6\n%d %d\n255\n" % (q.shape[1], q.shape[0]) + q.tobytes())
        return
    if suffix == ".png":
        if q.ndim == 2:
            Image.fromarray(q, mode="L").save(path, format="PNG")
        elif q.ndim == 3 and q.shape[2] == 3:
            Image.fromarray(q, mode="RGB").save(path, format="PNG")
        else:
            raise ValueError(f"cannot save array of shape {img.shape} as PNG")
        return
    raise FormatError(f"{path}: unsupported image format {suffix!r}")


def save_edge_map(edge: np.ndarray, path) -> None:
    """Write a signed single-precision edge map in the EGMP container."""
    edge = np.asarray(edge, dtype=float)
    if edge.ndim != 2:
        raise ValueError("edge maps are 2-D")
    if not np.all(np.isfinite(edge)):
        raise ValueError("edge map contains non-finite values")
    rows, cols = edge.shape
    if rows >= 2 ** 32 or cols >= 2 ** 32:
        raise ValueError("edge map dimensions overflow the 32-bit header fields")
    payload = edge.astype("<f4").tobytes()
    Path(path).write_bytes(_HEADER.pack(EDGE_MAP_MAGIC, EDGE_MAP_VERSION, rows, cols) + payload)


def load_edge_map(path) -> np.ndarray:
    """Read an EGMP edge map back as float64 (exact float32 values)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: truncated edge-map header")
    magic, version, rows, cols = _HEADER.unpack_from(data)
    if magic != EDGE_MAP_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != EDGE_MAP_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    need = rows * cols * 4
    if len(data) != _HEADER.size + need:
        raise FormatError(
            f"{path}: payload is {len(data) - _HEADER.size} bytes, expected {need}"
        )
    values = np.frombuffer(data, dtype="<f4", offset=_HEADER.size)
    if not np.all(np.isfinite(values)):
        raise FormatError(f"{path}: edge map contains non-finite values")
    return values.astype(float).reshape(rows, cols)
