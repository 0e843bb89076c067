"""File formats used by the pipeline: PNG (8/16-bit gray and RGB), spectrum
CSV, and the raw PMAP photon dump.

The PNG codec is self-contained on top of zlib. It covers exactly the subset
the pipeline needs, including 16-bit RGB output (which mainstream Python
imaging libraries cannot write) and the `photoncal:scale` text chunk that
makes quantized photon maps self-describing. Files written here always use
filter type 0; the reader additionally unfilters types 1-4 so frames from
other writers remain readable.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError
from .spectral import Spectrum

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
PHOTON_SCALE_KEY = "photoncal:scale"

PMAP_MAGIC = b"PMAP"
PMAP_HEADER = struct.Struct("<4sIII")  # magic, width, height, reserved

_COLOR_TYPE_NAMES = {
    0: "grayscale",
    2: "truecolor",
    3: "indexed-color (palette)",
    4: "grayscale with alpha",
    6: "truecolor with alpha",
}


@dataclass
class ImageBuffer:
    """Decoded image samples plus any text metadata carried by the file."""

    data: np.ndarray  # (h, w) or (h, w, 3), uint8 or uint16
    text: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim not in (2, 3) or (arr.ndim == 3 and arr.shape[2] != 3):
            raise ValueError("image data must be (h, w) or (h, w, 3)")
        if arr.dtype not in (np.uint8, np.uint16):
            raise ValueError(f"image dtype must be uint8 or uint16, got {arr.dtype}")
        self.data = arr

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else 3

    @property
    def bit_depth(self) -> int:
        return 8 if self.data.dtype == np.uint8 else 16

    @property
    def scale(self) -> float:
        """Quantization scale from the photoncal:scale chunk, 1.0 if absent."""
        return float(self.text.get(PHOTON_SCALE_KEY, 1.0))


def _chunk(kind: bytes, payload: bytes) -> bytes:
    crc = zlib.crc32(kind + payload) & 0xFFFFFFFF
    return struct.pack(">I", len(payload)) + kind + payload + struct.pack(">I", crc)


def write_png(buf, path, *, text: dict[str, str] | None = None, compress_level: int = 1) -> None:
    """Encode an image as a non-interlaced PNG.

    `buf` is an ImageBuffer or a bare uint8/uint16 array of shape (h, w) or
    (h, w, 3). Text metadata is written as tEXt chunks (Latin-1 keys/values).
    """
    if isinstance(buf, ImageBuffer):
        merged = dict(buf.text)
        if text:
            merged.update(text)
        text = merged
        arr = buf.data
    else:
        arr = np.asarray(buf)
        buf = ImageBuffer(arr)  # validates shape/dtype
        arr = buf.data
    h, w = arr.shape[:2]
    channels = 1 if arr.ndim == 2 else 3
    depth = 8 if arr.dtype == np.uint8 else 16
    color_type = 0 if channels == 1 else 2

    ihdr = struct.pack(">IIBBBBB", w, h, depth, color_type, 0, 0, 0)
    pieces = [PNG_SIGNATURE, _chunk(b"IHDR", ihdr)]
    for key, value in (text or {}).items():
        pieces.append(_chunk(b"tEXt", key.encode("latin-1") + b"\x00" + str(value).encode("latin-1")))

    samples = arr.reshape(h, w * channels)
    if depth == 16:
        samples = samples.astype(">u2")
    row_bytes = samples.view(np.uint8).reshape(h, -1)
    raw = np.zeros((h, 1 + row_bytes.shape[1]), dtype=np.uint8)
    raw[:, 1:] = row_bytes  # leading 0 = filter type None
    pieces.append(_chunk(b"IDAT", zlib.compress(raw.tobytes(), compress_level)))
    pieces.append(_chunk(b"IEND", b""))
    with open(path, "wb") as fh:
        fh.write(b"".join(pieces))


def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    if pb <= pc:
        return b
    return c


def _unfilter(raw: np.ndarray, h: int, stride: int, bpp: int, path) -> np.ndarray:
    """Reverse PNG scanline filtering. raw is (h, 1 + stride) uint8."""
    filters = raw[:, 0]
    data = raw[:, 1:]
    if not filters.any():
        return data.copy()  # fast path: everything filter 0, as our writer emits

    out = np.zeros((h, stride), dtype=np.uint8)
    work = data.astype(np.int64)
    for y in range(h):
        f = filters[y]
        row = work[y]
        prev = out[y - 1].astype(np.int64) if y > 0 else np.zeros(stride, dtype=np.int64)
        if f == 0:
            rec = row
        elif f == 2:  # Up
            rec = row + prev
        elif f == 1:  # Sub: per byte-lane running sum
            rec = row.reshape(-1, bpp).cumsum(axis=0).reshape(-1)
        elif f in (3, 4):  # Average / Paeth need the left neighbour sequentially
            rec = np.empty(stride, dtype=np.int64)
            for i in range(stride):
                left = rec[i - bpp] & 0xFF if i >= bpp else 0
                up = prev[i] & 0xFF
                ul = (out[y - 1, i - bpp] if (y > 0 and i >= bpp) else 0)
                if f == 3:
                    rec[i] = row[i] + ((left + up) >> 1)
                else:
                    rec[i] = row[i] + _paeth(left, int(up), int(ul))
        else:
            raise FormatError(path, f"unknown PNG filter type {f} on scanline {y}")
        out[y] = rec & 0xFF
    return out


def read_png(path) -> ImageBuffer:
    """Decode a PNG into an ImageBuffer.

    Supports non-interlaced grayscale and truecolor at 8 or 16 bits; other
    color types and bit depths are rejected with the encountered type named.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 8 or data[:8] != PNG_SIGNATURE:
        raise FormatError(path, "not a PNG file (bad signature)", offset=0)

    pos = 8
    ihdr = None
    idat = []
    text: dict[str, str] = {}
    while pos < len(data):
        if pos + 8 > len(data):
            raise FormatError(path, "truncated chunk header", offset=pos)
        length, kind = struct.unpack(">I4s", data[pos : pos + 8])
        end = pos + 8 + length + 4
        if end > len(data):
            raise FormatError(path, f"truncated {kind.decode('latin-1')} chunk", offset=pos)
        payload = data[pos + 8 : pos + 8 + length]
        (crc,) = struct.unpack(">I", data[pos + 8 + length : end])
        if crc != (zlib.crc32(kind + payload) & 0xFFFFFFFF):
            raise FormatError(path, f"CRC mismatch in {kind.decode('latin-1')} chunk", offset=pos)
        if kind == b"IHDR":
            ihdr = (payload, pos)
        elif kind == b"IDAT":
            idat.append(payload)
        elif kind == b"tEXt":
            key, _, value = payload.partition(b"\x00")
            text[key.decode("latin-1")] = value.decode("latin-1")
        elif kind == b"IEND":
            break
        pos = end

    if ihdr is None:
        raise FormatError(path, "missing IHDR chunk", offset=8)
    payload, ihdr_pos = ihdr
    w, h, depth, color_type, compression, filt, interlace = struct.unpack(">IIBBBBB", payload)
    if color_type not in (0, 2):
        name = _COLOR_TYPE_NAMES.get(color_type, str(color_type))
        raise FormatError(path, f"unsupported PNG color type {color_type} ({name})", offset=ihdr_pos)
    if depth not in (8, 16):
        raise FormatError(path, f"unsupported PNG bit depth {depth}", offset=ihdr_pos)
    if interlace != 0:
        raise FormatError(path, "interlaced PNG is not supported", offset=ihdr_pos)
    if compression != 0 or filt != 0:
        raise FormatError(path, "nonstandard compression/filter method", offset=ihdr_pos)
    if not idat:
        raise FormatError(path, "missing IDAT chunk", offset=pos)

    channels = 1 if color_type == 0 else 3
    bpp = channels * (depth // 8)
    stride = w * bpp
    try:
        decompressed = zlib.decompress(b"".join(idat))
    except zlib.error as exc:
        raise FormatError(path, f"corrupt image data: {exc}") from exc
    if len(decompressed) != h * (stride + 1):
        raise FormatError(path, f"image data is {len(decompressed)} bytes, expected {h * (stride + 1)}")
    raw = np.frombuffer(decompressed, dtype=np.uint8).reshape(h, stride + 1)
    flat = _unfilter(raw, h, stride, bpp, path)

    if depth == 16:
        arr = flat.reshape(h, -1).view(">u2").astype(np.uint16).reshape(h, w, channels)
    else:
        arr = flat.reshape(h, w, channels)
    if channels == 1:
        arr = arr.reshape(h, w)
    return ImageBuffer(arr.copy(), text)


def write_pmap(photons: np.ndarray, path) -> None:
    """Dump a photon map losslessly: 16-byte header then row-major little-endian f64."""
    arr = np.asarray(photons, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("photon map must be 2-D")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(PMAP_HEADER.pack(PMAP_MAGIC, w, h, 0))
        fh.write(arr.astype("<f8").tobytes())


def read_pmap(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < PMAP_HEADER.size:
        raise FormatError(path, "truncated header", offset=len(data))
    magic, w, h, _reserved = PMAP_HEADER.unpack_from(data)
    if magic != PMAP_MAGIC:
        raise FormatError(path, f"bad magic {magic!r}, expected {PMAP_MAGIC!r}", offset=0)
    expected = PMAP_HEADER.size + w * h * 8
    if len(data) != expected:
        raise FormatError(path, f"file is {len(data)} bytes, expected {expected}", offset=min(len(data), expected))
    return np.frombuffer(data, dtype="<f8", offset=PMAP_HEADER.size).reshape(h, w).astype(np.float64)


def read_spectrum_csv(path) -> Spectrum:
    """Parse a two-column `wavelength_nm,value` CSV into a Spectrum.

    An optional single header row is detected by a non-numeric first field.
    Negative values (spectrometer dark noise) are clamped to zero and counted
    on the returned spectrum. Errors cite the 1-based row number.
    """
    wavelengths: list[float] = []
    values: list[float] = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    row_no = 0
    for i, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != 2:
            raise FormatError(path, f"expected 2 comma-separated fields, got {len(fields)}", row=i)
        row_no += 1
        try:
            wl = float(fields[0])
        except ValueError:
            if row_no == 1:
                continue  # header row
            raise FormatError(path, f"non-numeric wavelength {fields[0]!r}", row=i) from None
        try:
            val = float(fields[1])
        except ValueError:
            raise FormatError(path, f"non-numeric value {fields[1]!r}", row=i) from None
        if wavelengths and wl <= wavelengths[-1]:
            raise FormatError(path, f"wavelength {wl} nm does not increase past {wavelengths[-1]} nm", row=i)
        wavelengths.append(wl)
        values.append(val)
    if not wavelengths:
        raise FormatError(path, "no data rows")
    if len(wavelengths) < 2:
        raise FormatError(path, "a spectrum needs at least 2 samples")
    return Spectrum.from_measured(np.array(wavelengths), np.array(values))


def write_spectrum_csv(s: Spectrum, path, *, header: bool = True) -> None:
    """Write a spectrum in the two-column CSV format, losslessly.

    Values use shortest round-trip float formatting so read-after-write is
    bit-exact.
    """
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write("wavelength_nm,value\n")
        for wl, val in zip(s.wavelengths_nm, s.values):
            fh.write(f"{float(wl)!r},{float(val)!r}\n")
