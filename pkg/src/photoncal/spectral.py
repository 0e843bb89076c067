"""Sampled optical spectra: resampling, pointwise weighting, trapezoidal integration.

A measured spectrum holds spectrometer counts per wavelength sample; a
quantum-efficiency curve holds dimensionless relative efficiency. Photon
totals are kept in the spectrometer's native counts-times-nanometer scale
throughout the pipeline; only relative scale matters for calibration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Two grids count as identical when every wavelength agrees this closely (nm).
GRID_MATCH_TOL_NM = 1e-9


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Values sampled on a strictly increasing wavelength grid (nanometers)."""

    wavelengths_nm: np.ndarray
    values: np.ndarray
    clamped_count: int = 0  # negative instrument samples clamped to 0 at ingestion

    def __post_init__(self):
        w = np.asarray(self.wavelengths_nm, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if w.ndim != 1 or v.ndim != 1:
            raise ValueError("spectrum samples must be 1-D sequences")
        if w.size != v.size:
            raise ValueError(f"length mismatch: {w.size} wavelengths vs {v.size} values")
        if w.size < 2:
            raise ValueError("a spectrum needs at least 2 samples")
        if not np.all(np.isfinite(w)):
            raise ValueError("wavelengths must be finite")
        if not np.all(np.isfinite(v)):
            raise ValueError("spectrum values must be finite")
        if np.any(np.diff(w) <= 0):
            raise ValueError("wavelengths must be strictly increasing")
        if np.any(v < 0):
            raise ValueError("spectrum values must be non-negative")
        w.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "wavelengths_nm", w)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_measured(cls, wavelengths_nm, values) -> "Spectrum":
        """Ingest raw instrument samples, clamping negative dark-noise values to 0.

        The number of clamped samples is recorded on the returned spectrum so
        callers can report suspicious data.
        """
        v = np.asarray(values, dtype=np.float64)
        clamped = int(np.count_nonzero(v < 0))
        return cls(wavelengths_nm, np.maximum(v, 0.0), clamped_count=clamped)

    @property
    def span_nm(self) -> tuple[float, float]:
        return float(self.wavelengths_nm[0]), float(self.wavelengths_nm[-1])

    def scaled(self, factor: float) -> "Spectrum":
        """Return a copy with all values multiplied by a non-negative factor."""
        if factor < 0:
            raise ValueError("scale factor must be non-negative")
        return Spectrum(self.wavelengths_nm, self.values * float(factor))

    def __len__(self) -> int:
        return int(self.wavelengths_nm.size)


def sample_at(s: Spectrum, wavelengths_nm) -> np.ndarray:
    """Linearly interpolate a spectrum at the given wavelengths.

    The query points must lie within the source span; no extrapolation.
    Queries that coincide with source samples return those values exactly.
    """
    q = np.atleast_1d(np.asarray(wavelengths_nm, dtype=np.float64))
    lo, hi = s.span_nm
    if q.size == 0:
        raise ValueError("need at least one wavelength to sample at")
    if q[0] < lo:
        raise ValueError(f"wavelength {q[0]} nm below source range start {lo} nm")
    if q[-1] > hi:
        raise ValueError(f"wavelength {q[-1]} nm above source range end {hi} nm")
    return np.interp(q, s.wavelengths_nm, s.values)


def resample(s: Spectrum, grid) -> Spectrum:
    """Resample a spectrum onto a new strictly increasing wavelength grid.

    The grid must fall within the source span (range error otherwise) and
    contain at least two points; use :func:`sample_at` for point queries.
    """
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim != 1 or g.size < 2:
        raise ValueError("resample grid must be 1-D with at least 2 wavelengths")
    if np.any(np.diff(g) <= 0):
        raise ValueError("resample grid must be strictly increasing")
    return Spectrum(g, sample_at(s, g))


def weight(sft: Spectrum, sqe: Spectrum) -> Spectrum:
    """Pointwise product of two spectra sampled on the identical grid.

    Callers resample onto a shared grid first; grids differing by more than
    1e-9 nm anywhere (or in length) are rejected.
    """
    a, b = sft.wavelengths_nm, sqe.wavelengths_nm
    if a.size != b.size or np.any(np.abs(a - b) > GRID_MATCH_TOL_NM):
        raise ValueError("spectra are not on the same wavelength grid; resample first")
    return Spectrum(a, sft.values * sqe.values)


def integrate(wsp: Spectrum) -> float:
    """Area under a spectrum by the composite trapezoidal rule.

    Returns the photon total in counts (counts-per-sample times nm).
    """
    w, v = wsp.wavelengths_nm, wsp.values
    dl = np.diff(w)
    return float(np.sum(0.5 * (v[:-1] + v[1:]) * dl))


def overlap_grid(measured: Spectrum, other: Spectrum) -> np.ndarray:
    """Wavelengths of `measured` restricted to the span shared with `other`.

    Measured spectrometer grids are finer than datasheet QE grids, so the
    shared grid keeps the measured sampling and drops out-of-range ends.
    """
    lo = max(measured.span_nm[0], other.span_nm[0])
    hi = min(measured.span_nm[1], other.span_nm[1])
    if lo >= hi:
        raise ValueError("spectra have no overlapping wavelength range")
    w = measured.wavelengths_nm
    grid = w[(w >= lo) & (w <= hi)]
    if grid.size < 2:
        raise ValueError("overlapping wavelength range covers fewer than 2 samples")
    return grid


def weighted_photon_total(measured: Spectrum, qe: Spectrum) -> float:
    """Photon total of a measured spectrum seen through a QE curve.

    Both spectra are brought onto the measured grid restricted to the
    overlapping range, multiplied pointwise, and integrated.
    """
    grid = overlap_grid(measured, qe)
    return integrate(weight(resample(measured, grid), resample(qe, grid)))
