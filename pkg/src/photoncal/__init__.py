"""photoncal: per-pixel radiometric camera calibration.

Builds piecewise-linear calibration curves (raw intensity to incident photon
count) from gray-filter spectra and camera QE profiles, corrects raw frames
into photon maps, and provides the downstream quarter-resolution demosaic and
two-class k-means++ segmentation, plus a synthetic chip simulator that serves
as the test oracle.
"""

from .calibration import (
    CalibrationFrameSet,
    CalibrationTable,
    build_table,
    load_table,
    mean_frame,
    photon_totals,
    save_table,
)
from .correction import PhotonMap, correct, preview_8bit, quantize_12bit
from .errors import CalibrationQualityError, FormatError
from .mosaic import RawFrame, RgbQuarterImage, channel_histogram, demosaic
from .segmentation import LabelMap, binarize, kmeans, kmeans_pp_init
from .simchip import ChipModel, SceneSpec, calibration_corpus, render
from .spectral import Spectrum, integrate, resample, sample_at, weight

__version__ = "0.1.0"

__all__ = [
    "CalibrationFrameSet",
    "CalibrationQualityError",
    "CalibrationTable",
    "ChipModel",
    "FormatError",
    "LabelMap",
    "PhotonMap",
    "RawFrame",
    "RgbQuarterImage",
    "SceneSpec",
    "Spectrum",
    "binarize",
    "build_table",
    "calibration_corpus",
    "channel_histogram",
    "correct",
    "demosaic",
    "integrate",
    "kmeans",
    "kmeans_pp_init",
    "load_table",
    "mean_frame",
    "photon_totals",
    "preview_8bit",
    "quantize_12bit",
    "render",
    "resample",
    "sample_at",
    "save_table",
    "weight",
]
