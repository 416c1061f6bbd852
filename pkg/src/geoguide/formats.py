"""Interchange formats: EMB1 embedding binaries, CSV matrices, PPM/PGM images.

EMB1 layout (normative, little-endian):

    bytes 0-3   magic ``EMB1``
    bytes 4-7   rows, uint32
    bytes 8-11  cols, uint32
    then        rows * cols float64 values, row-major

Write/read round-trips are bit-exact. CSV matrices are plain text, one row
per line, ``#``-prefixed comment lines allowed at any point; floats are
emitted with shortest round-trip formatting. Images travel as binary PPM
(P6) / PGM (P5), 8-bit, mapped linearly to pixel values in [0, 1].
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import (
    BadMagicError,
    CsvParseError,
    RaggedRowsError,
    TruncatedPayloadError,
)
from .validation import check_image, check_matrix

EMB1_MAGIC = b"EMB1"


def write_emb1(path, m) -> None:
    """Write a matrix in the EMB1 binary layout."""
    m = check_matrix(m, "matrix")
    rows, cols = m.shape
    with open(path, "wb") as fh:
        fh.write(EMB1_MAGIC)
        fh.write(struct.pack("<II", rows, cols))
        fh.write(np.ascontiguousarray(m, dtype="<f8").tobytes())


def read_emb1(path) -> np.ndarray:
    """Read an EMB1 file back into a float64 matrix."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4 or data[:4] != EMB1_MAGIC:
        raise BadMagicError(f"{path}: not an EMB1 file (bad magic)")
    if len(data) < 12:
        raise TruncatedPayloadError(f"{path}: header truncated")
    rows, cols = struct.unpack("<II", data[4:12])
    expect = rows * cols * 8
    payload = data[12:]
    if len(payload) != expect:
        raise TruncatedPayloadError(
            f"{path}: payload is {len(payload)} bytes, expected {expect}"
        )
    values = np.frombuffer(payload, dtype="<f8")
    return values.reshape(rows, cols).astype(np.float64)


def write_csv(path, m, comments: dict | None = None) -> None:
    """Write a matrix as comma-separated text with optional ``# k=v`` comments."""
    m = check_matrix(m, "matrix")
    with open(path, "w", encoding="ascii") as fh:
        for key, value in (comments or {}).items():
            fh.write(f"# {key}={value}\n")
        for row in m:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def read_csv(path) -> np.ndarray:
    """Read a CSV matrix, skipping ``#`` comment lines and blank lines."""
    rows: list[list[float]] = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            cells = text.split(",")
            try:
                rows.append([float(c) for c in cells])
            except ValueError as exc:
                raise CsvParseError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        return np.zeros((0, 0))
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise RaggedRowsError(f"{path}: rows have unequal lengths")
    return np.array(rows, dtype=np.float64)


def read_kv(path) -> dict[str, str]:
    """Read a flat ``key=value`` file; ``#`` comments and blanks are skipped."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            if "=" not in text:
                raise CsvParseError(f"{path}:{lineno}: expected key=value")
            key, _, value = text.partition("=")
            out[key.strip()] = value.strip()
    return out


def write_kv(path, mapping: dict) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for key in sorted(mapping):
            fh.write(f"{key}={mapping[key]}\n")


def _read_netpbm_header(data: bytes, path) -> tuple[bytes, int, int, int, int]:
    """Parse a P5/P6 header, returning (kind, width, height, maxval, offset)."""
    if len(data) < 2 or data[:2] not in (b"P5", b"P6"):
        raise BadMagicError(f"{path}: not a binary PGM/PPM file")
    kind = data[:2]
    fields: list[int] = []
    i = 2
    while len(fields) < 3:
        while i < len(data) and data[i : i + 1].isspace():
            i += 1
        if i < len(data) and data[i : i + 1] == b"#":
            while i < len(data) and data[i] != 0x0A:
                i += 1
            continue
        start = i
        while i < len(data) and not data[i : i + 1].isspace():
            i += 1
        if start == i:
            raise TruncatedPayloadError(f"{path}: header truncated")
        try:
            fields.append(int(data[start:i]))
        except ValueError as exc:
            raise CsvParseError(f"{path}: bad header token") from exc
    i += 1  # single whitespace byte after maxval
    width, height, maxval = fields
    if maxval != 255:
        raise CsvParseError(f"{path}: only 8-bit images supported, maxval={maxval}")
    return kind, width, height, maxval, i


def read_image(path) -> np.ndarray:
    """Read a P6 PPM or P5 PGM into an (H, W, C) float array in [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    kind, width, height, _, offset = _read_netpbm_header(data, path)
    channels = 3 if kind == b"P6" else 1
    expect = width * height * channels
    payload = data[offset : offset + expect]
    if len(payload) != expect:
        raise TruncatedPayloadError(
            f"{path}: pixel payload is {len(payload)} bytes, expected {expect}"
        )
    raw = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels)
    return raw.astype(np.float64) / 255.0


def write_image(path, img) -> None:
    """Write an (H, W, C) [0, 1] image as P6 (3 channels) or P5 (1 channel)."""
    x = check_image(img, "image")
    h, w, c = x.shape
    if c not in (1, 3):
        raise CsvParseError(f"image must have 1 or 3 channels, got {c}")
    kind = b"P6" if c == 3 else b"P5"
    quantized = np.clip(np.rint(x * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(kind + b"\n%d %d\n255\n" % (w, h))
        fh.write(quantized.tobytes())
