"""Per-pixel piecewise-linear calibration: photon totals from filter spectra,
table construction from mean calibration frames, and the PCAL file format.

For each pixel, consecutive (mean intensity, photon total) pairs define
linear segments with slope k = dA/dI and shift s = A - k*I, so evaluating the
table at a breakpoint returns that setting's photon total exactly. Pixels
with a non-increasing intensity step between consecutive filter settings
cannot carry a curve of their own; they are repaired from the nearest valid
pixel of the same Bayer site class.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import CalibrationQualityError, FormatError
from .mosaic import NO_PATTERN_CODE, PATTERN_CODES, PATTERN_FROM_CODE, channel_map
from .spectral import Spectrum, weighted_photon_total

# validity codes, stored verbatim in PCAL files
VALID = 0
REPAIRED = 1
DEAD = 2

# repaired pixels are searched on same-site-class neighbours (stride 2) over
# expanding Chebyshev rings; pixels with no valid donor within this many
# rings stay dead
REPAIR_MAX_RINGS = 8

PCAL_MAGIC = b"PCAL"
PCAL_VERSION = 1
_PCAL_HEADER = struct.Struct("<4sHIIHBB")  # magic, version, width, height, n_points, channels, pattern code


@dataclass(frozen=True, eq=False)
class CalibrationFrameSet:
    """Replicate raw-frame stacks for N filter settings, dark first, open last."""

    stacks: tuple  # N entries, each (P, H, W) uint16

    def __post_init__(self):
        stacks = tuple(np.asarray(s) for s in self.stacks)
        if len(stacks) < 2:
            raise ValueError("need at least 2 filter settings (dark and open)")
        shape = stacks[0].shape[1:]
        for i, s in enumerate(stacks):
            if s.ndim != 3 or s.shape[0] < 1:
                raise ValueError(f"stack {i} must be (parallels, height, width) with at least 1 frame")
            if s.shape[1:] != shape:
                raise ValueError(f"stack {i} has shape {s.shape[1:]}, expected {shape}")
        object.__setattr__(self, "stacks", stacks)

    @property
    def n_settings(self) -> int:
        return len(self.stacks)

    def mean_frames(self) -> list[np.ndarray]:
        return [mean_frame(s) for s in self.stacks]


@dataclass(frozen=True, eq=False)
class PhotonTotals:
    """Photon totals for N filter settings plus their ordering diagnosis."""

    values: np.ndarray  # (N,) float64
    monotone: bool

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(eq=False)
class CalibrationTable:
    """Per-pixel piecewise-linear map from raw intensity to photon total.

    Arrays are float64 in memory; persisting to PCAL quantizes the per-pixel
    arrays to float32 (the on-disk precision), so a freshly built table and
    its loaded copy agree to float32 resolution while file round trips are
    bit-exact.
    """

    breakpoints: np.ndarray     # (H, W, N) intensities, dark -> open
    slopes: np.ndarray          # (H, W, N-1) photons per intensity unit
    shifts: np.ndarray          # (H, W, N-1) photons
    validity: np.ndarray        # (H, W) uint8: VALID / REPAIRED / DEAD
    photon_totals: np.ndarray   # (C, N) float64; C=1 whole-frame, C=3 RGB
    pattern: str | None = None  # Bayer pattern when C == 3

    def __post_init__(self):
        self.breakpoints = np.ascontiguousarray(self.breakpoints, dtype=np.float64)
        self.slopes = np.ascontiguousarray(self.slopes, dtype=np.float64)
        self.shifts = np.ascontiguousarray(self.shifts, dtype=np.float64)
        self.validity = np.ascontiguousarray(self.validity, dtype=np.uint8)
        self.photon_totals = np.atleast_2d(np.asarray(self.photon_totals, dtype=np.float64))
        h, w, n = self.breakpoints.shape
        if n < 2:
            raise ValueError("a calibration table needs at least 2 points per pixel")
        if self.slopes.shape != (h, w, n - 1) or self.shifts.shape != (h, w, n - 1):
            raise ValueError("slopes/shifts must have one fewer point than breakpoints")
        if self.validity.shape != (h, w):
            raise ValueError("validity must match the pixel grid")
        c = self.photon_totals.shape[0]
        if self.photon_totals.shape != (c, n) or c not in (1, 3):
            raise ValueError("photon totals must be (1, N) or (3, N)")
        if c == 3 and self.pattern is None:
            raise ValueError("per-channel tables need a Bayer pattern")
        if c == 1:
            self.pattern = None

    @property
    def width(self) -> int:
        return self.breakpoints.shape[1]

    @property
    def height(self) -> int:
        return self.breakpoints.shape[0]

    @property
    def n_points(self) -> int:
        return self.breakpoints.shape[2]

    @property
    def channels(self) -> int:
        return self.photon_totals.shape[0]

    def validity_counts(self) -> dict[str, int]:
        return {
            "valid": int(np.count_nonzero(self.validity == VALID)),
            "repaired": int(np.count_nonzero(self.validity == REPAIRED)),
            "dead": int(np.count_nonzero(self.validity == DEAD)),
        }

    def photon_totals_per_pixel(self) -> np.ndarray:
        """(H, W, N) photon totals each pixel was calibrated against."""
        if self.channels == 1:
            return np.broadcast_to(self.photon_totals[0], (self.height, self.width, self.n_points))
        cmap = channel_map((self.height, self.width), self.pattern)
        return self.photon_totals[cmap]


def mean_frame(stack) -> np.ndarray:
    """Arithmetic per-pixel mean of replicate frames, in float64.

    Accepts a (P, H, W) array or a sequence of (H, W) frames.
    """
    if isinstance(stack, np.ndarray) and stack.ndim == 3:
        frames = stack
    else:
        frames = list(stack)
        if not frames:
            raise ValueError("need at least one replicate frame")
        shape = np.asarray(frames[0]).shape
        for i, f in enumerate(frames):
            if np.asarray(f).shape != shape:
                raise ValueError(f"replicate {i} has shape {np.asarray(f).shape}, expected {shape}")
        frames = np.stack([np.asarray(f) for f in frames])
    if frames.shape[0] < 1:
        raise ValueError("need at least one replicate frame")
    return frames.astype(np.float64).mean(axis=0)


def photon_totals(filter_spectra, qe: Spectrum) -> PhotonTotals:
    """Photon total reaching one colour channel for each filter setting.

    Spectra are expected dark to open; grid reconciliation against the QE
    curve happens internally. A non-monotone result is flagged rather than
    rejected, since it usually means the capture order is suspect.
    """
    spectra = list(filter_spectra)
    if len(spectra) < 2:
        raise ValueError("need at least 2 filter spectra (dark and open)")
    values = np.array([weighted_photon_total(s, qe) for s in spectra])
    monotone = bool(np.all(np.diff(values) >= 0))
    return PhotonTotals(values, monotone)


def _ring_offsets(ring: int) -> list[tuple[int, int]]:
    """Stride-2 offsets at Chebyshev ring `ring`, axis-aligned sites first."""
    d = 2 * ring
    offsets = []
    for dy in range(-d, d + 1, 2):
        for dx in range(-d, d + 1, 2):
            if max(abs(dy), abs(dx)) == d:
                offsets.append((dy, dx))
    offsets.sort(key=lambda o: (abs(o[0]) + abs(o[1]), o[0], o[1]))
    return offsets


_RING_CACHE = [_ring_offsets(r) for r in range(1, REPAIR_MAX_RINGS + 1)]


def _repair_dead(table_arrays, dead_mask: np.ndarray) -> np.ndarray:
    """Copy parameters from the nearest originally-valid same-site pixel.

    Returns the validity plane. Donors are restricted to pixels that were
    valid before any repair, so the result does not depend on scan order.
    """
    breakpoints, slopes, shifts = table_arrays
    h, w = dead_mask.shape
    valid = ~dead_mask
    validity = np.where(dead_mask, DEAD, VALID).astype(np.uint8)
    for y, x in np.argwhere(dead_mask):
        for ring in _RING_CACHE:
            donor = None
            for dy, dx in ring:
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w and valid[ny, nx]:
                    donor = (ny, nx)
                    break
            if donor is not None:
                breakpoints[y, x] = breakpoints[donor]
                slopes[y, x] = slopes[donor]
                shifts[y, x] = shifts[donor]
                validity[y, x] = REPAIRED
                break
    return validity


def build_table(
    totals,
    means,
    pattern: str | None = None,
    *,
    max_dead_fraction: float = 0.05,
) -> CalibrationTable:
    """Construct the per-pixel calibration table from photon totals and mean frames.

    Args:
        totals: photon totals, shape (N,) for a whole-frame table or (3, N)
            rows R, G, B for a per-channel table (then `pattern` is required).
        means: N mean calibration frames, dark to open, identical shapes.
        pattern: Bayer pattern naming which channel each pixel belongs to.
        max_dead_fraction: abort when more than this fraction of pixels is
            degenerate before repair.

    Per pixel j and segment i: slope = (A[i+1]-A[i]) / (mean_{i+1}(j)-mean_i(j)),
    shift = A[i] - slope*mean_i(j). Pixels with any non-positive intensity step
    are marked dead and then repaired from the nearest valid same-site pixel.
    """
    a = np.atleast_2d(np.asarray(totals, dtype=np.float64))
    frames = [np.asarray(m, dtype=np.float64) for m in means]
    n = len(frames)
    if n < 2:
        raise ValueError("need at least 2 calibration settings")
    if a.shape[1] != n:
        raise ValueError(f"got {a.shape[1]} photon totals for {n} mean frames")
    if a.shape[0] not in (1, 3):
        raise ValueError("photon totals must be (N,) or (3, N)")
    shape = frames[0].shape
    for i, f in enumerate(frames):
        if f.shape != shape:
            raise ValueError(f"mean frame {i} has shape {f.shape}, expected {shape}")
    h, w = shape
    per_channel = a.shape[0] == 3
    if per_channel and pattern is None:
        raise ValueError("per-channel photon totals need a Bayer pattern")

    breakpoints = np.stack(frames, axis=2)  # (H, W, N)
    steps = np.diff(breakpoints, axis=2)    # (H, W, N-1)

    if per_channel:
        cmap = channel_map(shape, pattern)
        masks = [cmap == c for c in range(3)]
    else:
        masks = [np.ones(shape, dtype=bool)]

    slopes = np.zeros((h, w, n - 1))
    shifts = np.zeros((h, w, n - 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        for ci, mask in enumerate(masks):
            for i in range(n - 1):
                da = a[ci, i + 1] - a[ci, i]
                seg = da / steps[:, :, i]
                slopes[:, :, i] = np.where(mask, seg, slopes[:, :, i])
                shifts[:, :, i] = np.where(mask, a[ci, i] - seg * breakpoints[:, :, i], shifts[:, :, i])

    degenerate = np.any(steps <= 0, axis=2) | np.any(~np.isfinite(slopes), axis=2) | np.any(slopes <= 0, axis=2)
    dead_fraction = degenerate.mean()
    if dead_fraction > max_dead_fraction:
        raise CalibrationQualityError(
            f"{dead_fraction:.1%} of pixels have a degenerate response "
            f"(limit {max_dead_fraction:.0%}); calibration data unusable"
        )

    if degenerate.any():
        slopes[degenerate] = 0.0
        shifts[degenerate] = 0.0
        validity = _repair_dead((breakpoints, slopes, shifts), degenerate)
    else:
        validity = np.full(shape, VALID, dtype=np.uint8)

    return CalibrationTable(breakpoints, slopes, shifts, validity, a, pattern if per_channel else None)


def save_table(table: CalibrationTable, path) -> None:
    """Persist a table in the PCAL binary format (little-endian, CRC-trailed).

    Layout: magic `PCAL`, version u16, width u32, height u32, n_points u16,
    channels u8, Bayer pattern code u8, photon totals (channels x N f64),
    then planar row-major per-pixel arrays (breakpoints f32, slopes f32,
    shifts f32), validity bytes, and a CRC32 of everything before it.
    """
    code = NO_PATTERN_CODE if table.pattern is None else PATTERN_CODES[table.pattern]
    header = _PCAL_HEADER.pack(
        PCAL_MAGIC, PCAL_VERSION, table.width, table.height, table.n_points, table.channels, code
    )
    body = b"".join(
        [
            header,
            table.photon_totals.astype("<f8").tobytes(),
            table.breakpoints.astype("<f4").tobytes(),
            table.slopes.astype("<f4").tobytes(),
            table.shifts.astype("<f4").tobytes(),
            table.validity.tobytes(),
        ]
    )
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF))


def load_table(path) -> CalibrationTable:
    """Load a PCAL file, verifying magic, version, size, and CRC."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _PCAL_HEADER.size + 4:
        raise FormatError(path, "truncated header", offset=len(data))
    magic, version, width, height, n_points, channels, code = _PCAL_HEADER.unpack_from(data)
    if magic != PCAL_MAGIC:
        raise FormatError(path, f"bad magic {magic!r}, expected {PCAL_MAGIC!r}", offset=0)
    if version != PCAL_VERSION:
        raise FormatError(path, f"unsupported version {version}", offset=4)
    if channels not in (1, 3):
        raise FormatError(path, f"channels must be 1 or 3, got {channels}", offset=16)
    if code != NO_PATTERN_CODE and code not in PATTERN_FROM_CODE:
        raise FormatError(path, f"unknown Bayer pattern code {code}", offset=17)

    npx = width * height
    sizes = [
        channels * n_points * 8,       # photon totals
        npx * n_points * 4,            # breakpoints
        npx * (n_points - 1) * 4,      # slopes
        npx * (n_points - 1) * 4,      # shifts
        npx,                           # validity
    ]
    expected = _PCAL_HEADER.size + sum(sizes) + 4
    if len(data) != expected:
        raise FormatError(
            path, f"file is {len(data)} bytes, expected {expected}", offset=min(len(data), expected)
        )
    (stored_crc,) = struct.unpack_from("<I", data, expected - 4)
    actual_crc = zlib.crc32(data[: expected - 4]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise FormatError(path, f"CRC mismatch: stored {stored_crc:#010x}, computed {actual_crc:#010x}", offset=expected - 4)

    pos = _PCAL_HEADER.size
    def take(count, dtype):
        nonlocal pos
        out = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
        pos += count * out.itemsize
        return out

    totals = take(channels * n_points, "<f8").reshape(channels, n_points)
    breakpoints = take(npx * n_points, "<f4").astype(np.float64).reshape(height, width, n_points)
    slopes = take(npx * (n_points - 1), "<f4").astype(np.float64).reshape(height, width, n_points - 1)
    shifts = take(npx * (n_points - 1), "<f4").astype(np.float64).reshape(height, width, n_points - 1)
    validity = take(npx, np.uint8).reshape(height, width).copy()
    pattern = None if code == NO_PATTERN_CODE else PATTERN_FROM_CODE[code]
    table = CalibrationTable(breakpoints, slopes, shifts, validity, totals.astype(np.float64), pattern)
    # loaded tables are shared across worker threads; freeze them
    for arr in (table.breakpoints, table.slopes, table.shifts, table.validity, table.photon_totals):
        arr.setflags(write=False)
    return table
