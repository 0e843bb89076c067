"""Bayer color-filter-array handling: raw frames, quarter-resolution demosaic,
per-channel histograms.

The demosaic is deliberately non-interpolating: every 2x2 Bayer tile collapses
into one RGB pixel (red and blue taken as-is, the two greens averaged), so no
synthetic values enter the data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# channel codes used throughout
R, G, B = 0, 1, 2

CHANNEL_NAMES = {"r": R, "g": G, "b": B}

# pattern -> 2x2 tile of channel codes, row-major
BAYER_PATTERNS = {
    "rggb": ((R, G), (G, B)),
    "bggr": ((B, G), (G, R)),
    "grbg": ((G, R), (B, G)),
    "gbrg": ((G, B), (R, G)),
}

# codes used in the calibration file header; 255 means "no pattern"
PATTERN_CODES = {"rggb": 0, "bggr": 1, "grbg": 2, "gbrg": 3}
PATTERN_FROM_CODE = {v: k for k, v in PATTERN_CODES.items()}
NO_PATTERN_CODE = 255


def _check_pattern(pattern: str) -> str:
    p = pattern.lower()
    if p not in BAYER_PATTERNS:
        raise ValueError(f"unknown Bayer pattern {pattern!r}; expected one of {sorted(BAYER_PATTERNS)}")
    return p


@dataclass(frozen=True, eq=False)
class RawFrame:
    """Single-channel 16-bit mosaic frame with a declared Bayer pattern."""

    intensities: np.ndarray
    pattern: str = "rggb"

    def __post_init__(self):
        arr = np.asarray(self.intensities)
        if arr.ndim != 2:
            raise ValueError("raw frame must be a 2-D array")
        if arr.dtype != np.uint16:
            if not np.issubdtype(arr.dtype, np.integer):
                raise ValueError("raw frame intensities must be integers")
            if arr.min() < 0 or arr.max() > 0xFFFF:
                raise ValueError("raw frame intensities exceed the 16-bit container")
            arr = arr.astype(np.uint16)
        h, w = arr.shape
        if h % 2 or w % 2:
            raise ValueError(f"frame dimensions must be even, got {w}x{h}")
        object.__setattr__(self, "intensities", arr)
        object.__setattr__(self, "pattern", _check_pattern(self.pattern))

    @property
    def width(self) -> int:
        return self.intensities.shape[1]

    @property
    def height(self) -> int:
        return self.intensities.shape[0]


@dataclass(frozen=True, eq=False)
class RgbQuarterImage:
    """Quarter-resolution 3-channel image from the non-interpolating demosaic."""

    data: np.ndarray  # (height, width, 3) float64

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError("RGB image must have shape (height, width, 3)")
        if not np.all(np.isfinite(arr)):
            raise ValueError("RGB channels must be finite")
        if arr.min() < 0:
            raise ValueError("RGB channels must be non-negative")
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


def channel_sites(pattern: str, channel: int) -> list[tuple[int, int]]:
    """(row, col) offsets within a 2x2 tile occupied by the given channel."""
    tile = BAYER_PATTERNS[_check_pattern(pattern)]
    return [(dy, dx) for dy in (0, 1) for dx in (0, 1) if tile[dy][dx] == channel]


def channel_mask(shape: tuple[int, int], pattern: str, channel: int) -> np.ndarray:
    """Boolean mask of the pixels belonging to one Bayer channel."""
    mask = np.zeros(shape, dtype=bool)
    for dy, dx in channel_sites(pattern, channel):
        mask[dy::2, dx::2] = True
    return mask


def channel_map(shape: tuple[int, int], pattern: str) -> np.ndarray:
    """Per-pixel channel codes (R=0, G=1, B=2) for a frame of the given shape."""
    tile = BAYER_PATTERNS[_check_pattern(pattern)]
    cmap = np.empty(shape, dtype=np.uint8)
    for dy in (0, 1):
        for dx in (0, 1):
            cmap[dy::2, dx::2] = tile[dy][dx]
    return cmap


def demosaic(frame, pattern: str | None = None) -> RgbQuarterImage:
    """Collapse each 2x2 Bayer tile into one RGB pixel.

    Accepts a RawFrame (pattern taken from it) or any real-valued 2-D array
    such as a photon map, in which case `pattern` is required. Red and blue
    are the tile's single samples; green is the mean of the two green sites.
    """
    if isinstance(frame, RawFrame):
        values = frame.intensities
        if pattern is not None and _check_pattern(pattern) != frame.pattern:
            raise ValueError(f"pattern {pattern!r} conflicts with the frame's {frame.pattern!r}")
        pattern = frame.pattern
    else:
        values = np.asarray(frame)
        if pattern is None:
            raise ValueError("pattern is required when demosaicing a bare array")
    p = _check_pattern(pattern)
    h, w = values.shape
    if h % 2 or w % 2:
        raise ValueError(f"frame dimensions must be even, got {w}x{h}")
    v = values.astype(np.float64, copy=False)

    out = np.empty((h // 2, w // 2, 3), dtype=np.float64)
    (ry, rx), = channel_sites(p, R)
    (by, bx), = channel_sites(p, B)
    (g1y, g1x), (g2y, g2x) = channel_sites(p, G)
    out[:, :, R] = v[ry::2, rx::2]
    out[:, :, G] = 0.5 * (v[g1y::2, g1x::2] + v[g2y::2, g2x::2])
    out[:, :, B] = v[by::2, bx::2]
    return RgbQuarterImage(out)


def channel_histogram(frame, channel, bins: int, pattern: str | None = None):
    """Histogram of one Bayer channel's intensities.

    Bin edges are uniform over [0, 4096), matching the 12-bit effective
    range; any sample above 4095 lands in the last bin so counts always sum
    to the channel's pixel count. Both green sites count toward the green
    channel. Returns (edges, counts) with len(edges) == bins + 1.
    """
    if isinstance(channel, str):
        channel = CHANNEL_NAMES[channel.lower()]
    if bins < 1:
        raise ValueError("bins must be >= 1")
    if isinstance(frame, RawFrame):
        values = frame.intensities
        if pattern is not None and _check_pattern(pattern) != frame.pattern:
            raise ValueError(f"pattern {pattern!r} conflicts with the frame's {frame.pattern!r}")
        pattern = frame.pattern
    else:
        values = np.asarray(frame)
        if pattern is None:
            raise ValueError("pattern is required when histogramming a bare array")
    mask = channel_mask(values.shape, pattern, channel)
    counts, edges = np.histogram(np.minimum(values[mask], 4095), bins=bins, range=(0, 4096))
    return edges, counts.astype(np.int64)


def histogram_local_maxima(counts, min_fraction: float = 0.0) -> list[int]:
    """Indices of local maxima in a histogram, plateau-aware.

    A bin is a local maximum when it is strictly greater than the nearest
    differing neighbours on both sides (edges count as lower ground) and its
    count is at least `min_fraction` of the total mass. A flat plateau
    contributes a single maximum at its first bin.
    """
    c = np.asarray(counts, dtype=np.float64)
    total = c.sum()
    if total <= 0:
        return []
    floor = min_fraction * total
    peaks = []
    i = 0
    n = c.size
    while i < n:
        j = i
        while j + 1 < n and c[j + 1] == c[i]:
            j += 1
        left = c[i - 1] if i > 0 else -np.inf
        right = c[j + 1] if j + 1 < n else -np.inf
        if c[i] > left and c[i] > right and c[i] >= floor and c[i] > 0:
            peaks.append(i)
        i = j + 1
    return peaks
