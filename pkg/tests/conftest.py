"""Shared fixtures: simulated chips, scenes, and calibrated pipelines."""

from dataclasses import dataclass

import numpy as np
import pytest

from photoncal import correct, simchip
from photoncal.calibration import CalibrationTable
from photoncal.correction import PhotonMap
from photoncal.mosaic import RawFrame
from photoncal.simchip import (
    ChipModel,
    Region,
    SceneSpec,
    calibration_corpus,
    corpus_table,
    default_lamp_spectrum,
    fish_chip,
    fish_scene,
    render,
)

CORPUS_SEED = 5
RENDER_SEED = 6


def tile_region_mask(region_map: np.ndarray) -> np.ndarray:
    """True where a pixel's whole 2x2 Bayer tile lies inside one region.

    Used to emulate the manual background masking: partially covered tiles
    would demosaic into mixed triples, so they are masked out too.
    """
    h, w = region_map.shape
    q = region_map.reshape(h // 2, 2, w // 2, 2)
    same = (
        (q[:, 0, :, 0] == q[:, 0, :, 1])
        & (q[:, 0, :, 0] == q[:, 1, :, 0])
        & (q[:, 0, :, 0] == q[:, 1, :, 1])
        & (q[:, 0, :, 0] > 0)
    )
    return np.repeat(np.repeat(same, 2, axis=0), 2, axis=1)


@dataclass
class PipelineBundle:
    chip: ChipModel
    scene: SceneSpec
    table: CalibrationTable
    frame: RawFrame
    truth: PhotonMap
    corrected: PhotonMap
    region_map: np.ndarray
    keep: np.ndarray


def build_bundle(chip, scene, *, parallels=6, corpus_seed=CORPUS_SEED, render_seed=RENDER_SEED,
                 calibration_scene=None) -> PipelineBundle:
    cal_scene = calibration_scene if calibration_scene is not None else simchip.flat_scene(
        filters=scene.filters
    )
    corpus = calibration_corpus(chip, cal_scene, parallels=parallels, seed=corpus_seed)
    table = corpus_table(corpus, chip.pattern)
    result = render(chip, scene, scene.n_settings - 1, seed=render_seed)
    corrected = correct(result.frame, table)
    rmap = simchip.region_map(scene, chip.shape)
    return PipelineBundle(
        chip, scene, table, result.frame, result.photons, corrected, rmap, tile_region_mask(rmap)
    )


def oracle_scene(width=640, height=512) -> SceneSpec:
    """Scene whose regions sit exactly at the calibration knot luminances."""
    filters = simchip.DEFAULT_FILTERS
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    rmax = float(np.hypot(cx, cy))
    return SceneSpec(
        default_lamp_spectrum(),
        filters,
        (
            Region("disc", (cx, cy, 0.25 * rmax), filters[2]),
            Region("annulus", (cx, cy, 0.4 * rmax, 0.55 * rmax), filters[3]),
            Region("rect", (10, 10, 120, 90), filters[1]),
            Region("rect", (width - 140, height - 100, 120, 90), filters[4]),
            Region("rect", (10, height - 60, 90, 50), 0.0),
        ),
        background_luminance=1.0,
    )


@pytest.fixture(scope="session")
def oracle_bundle() -> PipelineBundle:
    """Zero-noise piecewise-linear chip whose knots equal the filter settings."""
    scene = oracle_scene()
    chip = simchip.knotted_oracle_chip(640, 512, scene, vignette_alpha=0.3)
    return build_bundle(chip, scene, parallels=2)


@pytest.fixture(scope="session")
def gamma_bundle() -> PipelineBundle:
    """Nonlinear (gamma 0.9) chip with the default knot spacing."""
    from photoncal.spectral import weighted_photon_total

    scene = simchip.flat_scene(luminance=0.55)
    lamp = scene.base_spectrum
    a_open = max(weighted_photon_total(lamp, qe) for qe in simchip.default_qe_curves())
    chip = ChipModel(
        512, 384, "rggb",
        response=simchip.PowerResponse(gain=3500.0 / a_open**0.9, gamma=0.9, offset=40.0),
        vignette_alpha=0.25,
    )
    return build_bundle(chip, scene)


@pytest.fixture(scope="session")
def vignette_bundle() -> PipelineBundle:
    """Linear chip with strong pixel gain spread and the reference vignette."""
    from photoncal.spectral import weighted_photon_total

    scene = simchip.flat_scene()
    a_open = max(weighted_photon_total(scene.base_spectrum, qe) for qe in simchip.default_qe_curves())
    chip = ChipModel(
        512, 384, "rggb",
        response=simchip.PowerResponse(gain=3500.0 / a_open, gamma=1.0, prnu_sd=0.10, prnu_seed=7),
        vignette_alpha=0.3,
        noise_sd=1.5,
    )
    return build_bundle(chip, scene)


@pytest.fixture(scope="session")
def fish_bundle() -> PipelineBundle:
    """The tuned segmentation-stress fixture at full simulator size."""
    scene = fish_scene()
    return build_bundle(fish_chip(), scene)
