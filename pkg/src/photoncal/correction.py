"""Raw frame to photon map via the piecewise-linear table, plus quantization.

Each pixel's intensity selects one linear segment of its own calibration
curve (first segment extends below the dark breakpoint, last extends above
the open one) and is mapped through slope*v + shift. The whole operation is
per-pixel independent; row blocks can be processed by any number of threads
with bit-identical results.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .calibration import DEAD, CalibrationTable
from .mosaic import RawFrame

FLAG_OK = 0
FLAG_CLAMPED = 1      # raw result was negative, clamped to 0
FLAG_DEAD_SOURCE = 2  # pixel has no usable calibration curve

# rows per work unit; small enough to stay cache-resident per thread
BLOCK_ROWS = 128


@dataclass(frozen=True, eq=False)
class PhotonMap:
    """Per-pixel photon totals in double precision, with validity flags."""

    photons: np.ndarray  # (H, W) float64
    flags: np.ndarray    # (H, W) uint8

    def __post_init__(self):
        p = np.asarray(self.photons, dtype=np.float64)
        f = np.asarray(self.flags, dtype=np.uint8)
        if p.ndim != 2 or f.shape != p.shape:
            raise ValueError("photons and flags must be matching 2-D arrays")
        if not (np.isfinite(p) | (f == FLAG_DEAD_SOURCE)).all():
            raise ValueError("photon values must be finite for live pixels")
        if p.min(initial=0.0) < 0:
            raise ValueError("photon values must be non-negative after clamping")
        object.__setattr__(self, "photons", p)
        object.__setattr__(self, "flags", f)

    @property
    def width(self) -> int:
        return self.photons.shape[1]

    @property
    def height(self) -> int:
        return self.photons.shape[0]

    def flag_counts(self) -> dict[str, int]:
        return {
            "ok": int(np.count_nonzero(self.flags == FLAG_OK)),
            "clamped": int(np.count_nonzero(self.flags == FLAG_CLAMPED)),
            "dead_source": int(np.count_nonzero(self.flags == FLAG_DEAD_SOURCE)),
        }


def _correct_rows(values, bp, k, s, dead, out, flags):
    """Apply the piecewise map to one row block (disjoint output slices)."""
    v = values.astype(np.float64)
    n = bp.shape[2]
    # segment index = how many interior breakpoints lie at or below v;
    # ends extrapolate the first/last segment
    idx = np.zeros(v.shape, dtype=np.intp)
    for j in range(1, n - 1):
        idx += v >= bp[:, :, j]
    sel = idx[:, :, None]
    kk = np.take_along_axis(k, sel, axis=2)[:, :, 0]
    ss = np.take_along_axis(s, sel, axis=2)[:, :, 0]
    photons = kk * v + ss

    negative = photons < 0
    np.copyto(photons, 0.0, where=negative)
    block_flags = np.where(negative, FLAG_CLAMPED, FLAG_OK).astype(np.uint8)
    if dead.any():
        photons[dead] = 0.0
        block_flags[dead] = FLAG_DEAD_SOURCE
    out[...] = photons
    flags[...] = block_flags


def correct(frame, table: CalibrationTable, *, workers: int = 1) -> PhotonMap:
    """Convert a raw frame into a photon map using its calibration table.

    Args:
        frame: RawFrame or bare 2-D intensity array matching the table.
        table: calibration table built for this sensor.
        workers: row-partitioned thread count; results are bit-identical
            for any value.
    """
    values = frame.intensities if isinstance(frame, RawFrame) else np.asarray(frame)
    if values.ndim != 2:
        raise ValueError("frame must be 2-D")
    if values.shape != (table.height, table.width):
        raise ValueError(
            f"frame is {values.shape[1]}x{values.shape[0]}, table is {table.width}x{table.height}"
        )
    dead = table.validity == DEAD
    h = values.shape[0]
    out = np.empty(values.shape, dtype=np.float64)
    flags = np.empty(values.shape, dtype=np.uint8)

    spans = [(r, min(r + BLOCK_ROWS, h)) for r in range(0, h, BLOCK_ROWS)]

    def run(span):
        r0, r1 = span
        _correct_rows(
            values[r0:r1],
            table.breakpoints[r0:r1],
            table.slopes[r0:r1],
            table.shifts[r0:r1],
            dead[r0:r1],
            out[r0:r1],
            flags[r0:r1],
        )

    if workers <= 1 or len(spans) == 1:
        for span in spans:
            run(span)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, spans))
    return PhotonMap(out, flags)


def quantize_12bit(pmap: PhotonMap, scale="auto"):
    """Quantize a photon map into the 12-bit range of a 16-bit container.

    pixel = round(photons * scale), clipped to [0, 4095]. With `scale="auto"`
    the factor is 4095 / max(photons over ok pixels); an all-zero map gets
    scale 1. Returns (uint16 array, scale used); the scale belongs in the
    output file's `photoncal:scale` chunk.
    """
    if scale == "auto":
        ok = pmap.flags == FLAG_OK
        peak = float(pmap.photons[ok].max()) if ok.any() else 0.0
        factor = 4095.0 / peak if peak > 0 else 1.0
    else:
        factor = float(scale)
        if factor <= 0:
            raise ValueError("scale must be positive")
    img = np.floor(pmap.photons * factor + 0.5)
    np.clip(img, 0, 4095, out=img)
    return img.astype(np.uint16), factor


def preview_8bit(img) -> np.ndarray:
    """Per-channel min-max stretch to 8 bits for quick viewing.

    A constant channel maps to 0. Rounding is half away from zero. Not an
    information-preserving transform; use only for previews.
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
        squeeze = True
    elif arr.ndim == 3:
        squeeze = False
    else:
        raise ValueError("image must be 2-D or 3-D")
    out = np.zeros(arr.shape, dtype=np.uint8)
    for c in range(arr.shape[2]):
        plane = arr[:, :, c]
        lo, hi = plane.min(), plane.max()
        if hi > lo:
            stretched = (plane - lo) * (255.0 / (hi - lo))
            out[:, :, c] = np.floor(stretched + 0.5).astype(np.uint8)
    return out[:, :, 0] if squeeze else out
