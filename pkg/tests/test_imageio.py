import os
import struct
import time
import zlib

import numpy as np
import pytest

from photoncal.errors import FormatError
from photoncal.imageio import (
    PHOTON_SCALE_KEY,
    PNG_SIGNATURE,
    ImageBuffer,
    read_pmap,
    read_png,
    read_spectrum_csv,
    write_pmap,
    write_png,
    write_spectrum_csv,
)
from photoncal.spectral import Spectrum


def _chunk(kind, payload):
    crc = zlib.crc32(kind + payload) & 0xFFFFFFFF
    return struct.pack(">I", len(payload)) + kind + payload + struct.pack(">I", crc)


def _png_bytes(arr, color_type, depth, filters):
    """Hand-rolled PNG encoder applying a chosen filter type per scanline.

    Independent of the library writer; used to check the reader against
    foreign files.
    """
    h, w = arr.shape[:2]
    channels = 1 if arr.ndim == 2 else arr.shape[2]
    bpp = channels * depth // 8
    samples = arr.reshape(h, w * channels)
    if depth == 16:
        samples = samples.astype(">u2")
    rows = samples.view(np.uint8).reshape(h, -1).astype(np.int64)
    out = bytearray()
    prev = np.zeros(rows.shape[1], dtype=np.int64)
    for y, ftype in enumerate(filters):
        cur = rows[y]
        left = np.concatenate([np.zeros(bpp, dtype=np.int64), cur[:-bpp]])
        up_left = np.concatenate([np.zeros(bpp, dtype=np.int64), prev[:-bpp]])
        if ftype == 0:
            enc = cur
        elif ftype == 1:
            enc = cur - left
        elif ftype == 2:
            enc = cur - prev
        elif ftype == 3:
            enc = cur - (left + prev) // 2
        else:
            p = left + prev - up_left
            pa, pb, pc = np.abs(p - left), np.abs(p - prev), np.abs(p - up_left)
            pred = np.where((pa <= pb) & (pa <= pc), left, np.where(pb <= pc, prev, up_left))
            enc = cur - pred
        out.append(ftype)
        out.extend((enc & 0xFF).astype(np.uint8).tobytes())
        prev = cur
    ihdr = struct.pack(">IIBBBBB", w, h, depth, color_type, 0, 0, 0)
    return (
        PNG_SIGNATURE
        + _chunk(b"IHDR", ihdr)
        + _chunk(b"IDAT", zlib.compress(bytes(out)))
        + _chunk(b"IEND", b"")
    )


class TestPngRoundTrip:
    def test_16bit_gray(self, tmp_path):
        arr = np.array([[0, 65535], [4095, 1]], dtype=np.uint16)
        path = tmp_path / "g16.png"
        write_png(arr, path)
        buf = read_png(path)
        assert buf.bit_depth == 16 and buf.channels == 1
        assert np.array_equal(buf.data, arr)

    def test_8bit_gray_and_rgb(self, tmp_path):
        g = np.arange(12, dtype=np.uint8).reshape(3, 4)
        rgb = np.arange(36, dtype=np.uint8).reshape(3, 4, 3)
        write_png(g, tmp_path / "g8.png")
        write_png(rgb, tmp_path / "rgb8.png")
        assert np.array_equal(read_png(tmp_path / "g8.png").data, g)
        assert np.array_equal(read_png(tmp_path / "rgb8.png").data, rgb)

    def test_16bit_rgb(self, tmp_path):
        rng = np.random.default_rng(0)
        rgb = rng.integers(0, 65536, (5, 7, 3)).astype(np.uint16)
        write_png(rgb, tmp_path / "rgb16.png")
        assert np.array_equal(read_png(tmp_path / "rgb16.png").data, rgb)

    def test_scale_text_chunk(self, tmp_path):
        arr = np.zeros((2, 2), dtype=np.uint16)
        path = tmp_path / "scaled.png"
        write_png(arr, path, text={PHOTON_SCALE_KEY: repr(0.123456789)})
        buf = read_png(path)
        assert buf.scale == 0.123456789

    def test_missing_scale_defaults_to_one(self, tmp_path):
        write_png(np.zeros((2, 2), dtype=np.uint16), tmp_path / "plain.png")
        assert read_png(tmp_path / "plain.png").scale == 1.0

    def test_random_16bit_frames(self, tmp_path):
        rng = np.random.default_rng(1)
        arr = rng.integers(0, 4096, (64, 80)).astype(np.uint16)
        write_png(arr, tmp_path / "r.png")
        assert np.array_equal(read_png(tmp_path / "r.png").data, arr)


class TestPngReaderForeignFiles:
    @pytest.mark.parametrize("ftype", [0, 1, 2, 3, 4])
    def test_unfilters_every_type(self, tmp_path, ftype):
        rng = np.random.default_rng(ftype)
        arr = rng.integers(0, 4096, (6, 5)).astype(np.uint16)
        data = _png_bytes(arr, color_type=0, depth=16, filters=[ftype] * 6)
        path = tmp_path / f"f{ftype}.png"
        path.write_bytes(data)
        assert np.array_equal(read_png(path).data, arr)

    def test_mixed_filters_rgb8(self, tmp_path):
        rng = np.random.default_rng(9)
        arr = rng.integers(0, 256, (5, 4, 3)).astype(np.uint8)
        data = _png_bytes(arr, color_type=2, depth=8, filters=[0, 1, 2, 3, 4])
        path = tmp_path / "mixed.png"
        path.write_bytes(data)
        assert np.array_equal(read_png(path).data, arr)

    def test_palette_rejected_by_name(self, tmp_path):
        ihdr = struct.pack(">IIBBBBB", 2, 2, 8, 3, 0, 0, 0)
        data = PNG_SIGNATURE + _chunk(b"IHDR", ihdr) + _chunk(b"IEND", b"")
        path = tmp_path / "palette.png"
        path.write_bytes(data)
        with pytest.raises(FormatError, match="color type 3.*palette"):
            read_png(path)

    def test_alpha_rejected(self, tmp_path):
        ihdr = struct.pack(">IIBBBBB", 2, 2, 8, 6, 0, 0, 0)
        path = tmp_path / "alpha.png"
        path.write_bytes(PNG_SIGNATURE + _chunk(b"IHDR", ihdr) + _chunk(b"IEND", b""))
        with pytest.raises(FormatError, match="color type 6"):
            read_png(path)


class TestPngErrors:
    def test_bad_signature_offset_zero(self, tmp_path):
        path = tmp_path / "bad.png"
        path.write_bytes(b"NOTAPNG!rest")
        with pytest.raises(FormatError, match="byte offset 0"):
            read_png(path)

    def test_truncated_chunk(self, tmp_path):
        path = tmp_path / "trunc.png"
        write_png(np.zeros((2, 2), dtype=np.uint16), path)
        data = path.read_bytes()
        path.write_bytes(data[:-6])
        with pytest.raises(FormatError, match="truncated"):
            read_png(path)

    def test_crc_mismatch_located(self, tmp_path):
        path = tmp_path / "crc.png"
        write_png(np.zeros((2, 2), dtype=np.uint16), path)
        data = bytearray(path.read_bytes())
        data[20] ^= 0xFF  # corrupt inside IHDR payload
        path.write_bytes(bytes(data))
        with pytest.raises(FormatError, match="offset 8.*CRC mismatch"):
            read_png(path)

    def test_write_rejects_bad_dtype(self, tmp_path):
        with pytest.raises(ValueError, match="uint8 or uint16"):
            write_png(np.zeros((2, 2), dtype=np.float64), tmp_path / "x.png")


@pytest.mark.skipif((os.cpu_count() or 1) < 4, reason="round-trip timing targets a desktop-class machine")
def test_full_frame_round_trip_under_300ms(tmp_path):
    rng = np.random.default_rng(0)
    arr = (rng.normal(2000, 300, (2560, 2048)).clip(0, 4095)).astype(np.uint16)
    path = tmp_path / "full.png"
    start = time.perf_counter()
    write_png(arr, path)
    out = read_png(path).data
    elapsed = time.perf_counter() - start
    assert np.array_equal(out, arr)
    assert elapsed < 0.3, f"round trip took {elapsed:.3f}s"


class TestPmap:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(2)
        photons = rng.uniform(0, 1e6, (7, 9))
        path = tmp_path / "m.pmap"
        write_pmap(photons, path)
        assert np.array_equal(read_pmap(path), photons)

    def test_bad_magic_offset_zero(self, tmp_path):
        path = tmp_path / "bad.pmap"
        path.write_bytes(b"XMAP" + b"\x00" * 24)
        with pytest.raises(FormatError, match="offset 0.*bad magic"):
            read_pmap(path)

    def test_truncated_payload_located(self, tmp_path):
        path = tmp_path / "short.pmap"
        write_pmap(np.zeros((4, 4)), path)
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(FormatError, match="expected"):
            read_pmap(path)


class TestSpectrumCsv:
    def test_two_row_file(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("400,0.0\n500,10.0\n")
        s = read_spectrum_csv(path)
        assert len(s) == 2
        assert s.values.tolist() == [0.0, 10.0]

    def test_header_row_skipped(self, tmp_path):
        path = tmp_path / "h.csv"
        path.write_text("wavelength_nm,value\n400,1\n500,2\n")
        assert len(read_spectrum_csv(path)) == 2

    def test_non_increasing_wavelength_cites_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("500,1\n400,2\n")
        with pytest.raises(FormatError, match="row 2"):
            read_spectrum_csv(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(FormatError, match="no data rows"):
            read_spectrum_csv(path)

    def test_malformed_row_cites_row(self, tmp_path):
        path = tmp_path / "mal.csv"
        path.write_text("400,1\n500\n")
        with pytest.raises(FormatError, match="row 2"):
            read_spectrum_csv(path)

    def test_negative_values_clamped_and_counted(self, tmp_path):
        path = tmp_path / "neg.csv"
        path.write_text("400,-0.25\n500,3\n")
        s = read_spectrum_csv(path)
        assert s.clamped_count == 1
        assert s.values.tolist() == [0.0, 3.0]

    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        s = Spectrum(np.sort(rng.uniform(380, 720, 40)), rng.uniform(0, 1e5, 40))
        path = tmp_path / "rt.csv"
        write_spectrum_csv(s, path)
        back = read_spectrum_csv(path)
        assert np.array_equal(back.wavelengths_nm, s.wavelengths_nm)
        assert np.array_equal(back.values, s.values)


class TestImageBuffer:
    def test_shape_validation(self):
        with pytest.raises(ValueError, match="image data"):
            ImageBuffer(np.zeros((2, 2, 2), dtype=np.uint8))

    def test_properties(self):
        buf = ImageBuffer(np.zeros((3, 5, 3), dtype=np.uint16))
        assert (buf.width, buf.height, buf.channels, buf.bit_depth) == (5, 3, 3, 16)
