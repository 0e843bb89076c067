"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
report. Simulator-backed criteria use the session fixtures from conftest.
"""

import os
import time
from fractions import Fraction

import numpy as np
import pytest

from photoncal import build_table, correct, demosaic, simchip
from photoncal.calibration import DEAD, load_table, save_table
from photoncal.correction import quantize_12bit
from photoncal.errors import FormatError
from photoncal.imageio import (
    read_pmap,
    read_png,
    read_spectrum_csv,
    write_pmap,
    write_png,
    write_spectrum_csv,
)
from photoncal.mosaic import channel_histogram, channel_mask, histogram_local_maxima
from photoncal.segmentation import binarize, disagreement, kmeans, kmeans_pp_init
from photoncal.spectral import Spectrum, integrate

from conftest import oracle_scene


def report(number: int, description: str, passed: bool, detail: str = ""):
    status = "PASS" if passed else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[criterion {number:2d}] {status}: {description}{suffix}")
    assert passed, f"criterion {number}: {description}{suffix}"


def relative_error(estimate, truth):
    err = np.abs(estimate - truth)
    return np.where(truth > 0, err / np.where(truth > 0, truth, 1.0), err)


def test_criterion_01_oracle_round_trip():
    scene = oracle_scene()
    chip = simchip.knotted_oracle_chip(640, 512, scene, vignette_alpha=0.3)

    start = time.perf_counter()
    corpus = simchip.calibration_corpus(chip, simchip.flat_scene(), parallels=6, seed=0)
    table = simchip.corpus_table(corpus, chip.pattern)
    result = simchip.render(chip, scene, scene.n_settings - 1, seed=0)
    recovered = correct(result.frame, table)
    elapsed = time.perf_counter() - start

    rel = relative_error(recovered.photons, result.photons.photons)
    report(
        1,
        "zero-noise piecewise-linear chip: pipeline recovers ground truth to 1e-9",
        float(rel.max()) <= 1e-9 and elapsed < 5.0,
        f"max rel err {rel.max():.3e}, {elapsed:.2f}s on 512x640",
    )


def test_criterion_02_nonlinear_response_between_knots(gamma_bundle):
    # pre-build bound: the largest inverse-response chord error over the
    # default knot ratios is 1.05% (segment 0.08 -> 0.20 of t**(1/0.9)),
    # plus <0.2% quantization, comfortably inside the 2% budget
    chip, table = gamma_bundle.chip, gamma_bundle.table
    worst = 0.0
    for luminance in (0.12, 0.30, 0.55, 0.85):
        scene = simchip.flat_scene(luminance=luminance)
        result = simchip.render(chip, scene, scene.n_settings - 1, seed=2)
        recovered = correct(result.frame, table)
        rel = relative_error(recovered.photons, result.photons.photons)
        worst = max(worst, float(rel.max()))
    report(
        2,
        "gamma-0.9 chip, 6 knots: corrected map within 2% everywhere between knots",
        worst <= 0.02,
        f"max rel err {worst:.3%}",
    )


def test_criterion_03_vignetting_removal(vignette_bundle):
    chip = vignette_bundle.chip
    raw = vignette_bundle.frame.intensities.astype(np.float64)
    corrected = vignette_bundle.corrected.photons
    raw_cv, cor_cv = [], []
    for channel in range(3):
        mask = channel_mask(chip.shape, chip.pattern, channel)
        raw_cv.append(raw[mask].std() / raw[mask].mean())
        cor_cv.append(corrected[mask].std() / corrected[mask].mean())
    report(
        3,
        "flat field, vignette 0.3: raw CV >= 10%, corrected CV <= 1% per channel",
        min(raw_cv) >= 0.10 and max(cor_cv) <= 0.01,
        f"raw {min(raw_cv):.1%}..{max(raw_cv):.1%}, corrected max {max(cor_cv):.3%}",
    )


def test_criterion_04_histogram_flattening(fish_bundle):
    peak_counts = []
    for channel in "rgb":
        _, counts = channel_histogram(fish_bundle.frame, channel, 64)
        peak_counts.append(len(histogram_local_maxima(counts, 0.01)))

    background = fish_bundle.region_map == 3  # outer ring region
    gmask = channel_mask(fish_bundle.chip.shape, fish_bundle.chip.pattern, 1)
    quantized, _ = quantize_12bit(fish_bundle.corrected)
    counts_bg, _ = np.histogram(quantized[background & gmask], bins=64, range=(0, 4096))
    bg_peaks = len(histogram_local_maxima(counts_bg, 0.01))
    report(
        4,
        "fish scene: raw channels trimodal, corrected background region unimodal",
        min(peak_counts) >= 3 and bg_peaks == 1,
        f"raw peaks {peak_counts}, corrected background peaks {bg_peaks}",
    )


def test_criterion_05_segmentation_stability(fish_bundle):
    keep = fish_bundle.keep
    masked_raw = np.where(keep, fish_bundle.frame.intensities, 0).astype(np.uint16)
    masked_cor = np.where(keep, fish_bundle.corrected.photons, 0.0)
    pattern = fish_bundle.chip.pattern

    def label_maps(values):
        rgb = demosaic(values, pattern)
        return [binarize(rgb, seed=seed) for seed in range(10)]

    def distinct(maps):
        unique = []
        for m in maps:
            if not any(np.array_equal(m.labels, u.labels) for u in unique):
                unique.append(m)
        return unique

    corrected_unique = distinct(label_maps(masked_cor))
    raw_unique = distinct(label_maps(masked_raw))
    pair_disagreements = [
        disagreement(a, b) for i, a in enumerate(raw_unique) for b in raw_unique[i + 1 :]
    ]
    report(
        5,
        "10 seeds: corrected label maps identical, uncorrected split >= 5%",
        len(corrected_unique) == 1
        and len(raw_unique) >= 2
        and min(pair_disagreements) >= 0.05,
        f"corrected {len(corrected_unique)} map(s), uncorrected {len(raw_unique)}, "
        f"min disagreement {min(pair_disagreements) if pair_disagreements else 0:.1%}",
    )


def test_criterion_06_algorithm_arithmetic(oracle_bundle, gamma_bundle, vignette_bundle, fish_bundle):
    a = np.array([0.0, 50.0, 100.0])
    table = build_table(a, [np.full((2, 2), v) for v in (0.0, 25.0, 100.0)])
    hand_slopes = (2.0, float(Fraction(2, 3)))
    hand_shifts = (0.0, 50.0 - (2.0 / 3.0) * 25.0)
    arithmetic_ok = all(
        abs(table.slopes[0, 0, i] - hand_slopes[i]) < 1e-12
        and abs(table.shifts[0, 0, i] - hand_shifts[i]) < 1e-12
        for i in range(2)
    )

    worst = 0.0
    for bundle in (oracle_bundle, gamma_bundle, vignette_bundle, fish_bundle):
        t = bundle.table
        live = t.validity != DEAD
        a_px = t.photon_totals_per_pixel()
        scale = np.maximum(np.abs(a_px), 1.0)
        left = t.slopes * t.breakpoints[:, :, :-1] + t.shifts  # value at left knot
        right = t.slopes * t.breakpoints[:, :, 1:] + t.shifts  # value at right knot
        err_left = np.abs(left - a_px[:, :, :-1]) / scale[:, :, :-1]
        err_right = np.abs(right - a_px[:, :, 1:]) / scale[:, :, 1:]
        worst = max(worst, float(err_left[live].max()), float(err_right[live].max()))
    report(
        6,
        "hand-checked slopes/shifts to 1e-12; knot continuity 1e-9 on all tables",
        arithmetic_ok and worst <= 1e-9,
        f"continuity worst {worst:.2e}",
    )


def test_criterion_07_trapezoid_oracle():
    exact = (
        integrate(Spectrum([400, 430, 500], [3, 3, 3])) == 300.0
        and integrate(Spectrum([400, 500], [0, 10])) == 500.0
        and integrate(Spectrum([1, 2, 3, 4], [1, 4, 9, 16])) == 21.5
    )
    analytic = (4.0**3 - 1.0) / 3.0
    errors = []
    for n in (16, 32, 64):
        w = np.linspace(1, 4, n + 1)
        errors.append(abs(integrate(Spectrum(w, w**2)) - analytic))
    ratios = (errors[0] / errors[1], errors[1] / errors[2])
    quadratic = all(abs(r - 4.0) < 0.2 for r in ratios)
    report(
        7,
        "trapezoid matches hand sums exactly; error shrinks 4x per grid halving",
        exact and quadratic,
        f"halving ratios {ratios[0]:.3f}, {ratios[1]:.3f}",
    )


def test_criterion_08_kmeans_properties():
    deterministic = True
    monotone = True
    for fixture_seed in range(10):
        rng = np.random.default_rng(100 + fixture_seed)
        centers = rng.uniform(0, 100, (3, 3))
        points = np.concatenate(
            [rng.normal(c, rng.uniform(1, 10), (3334, 3)) for c in centers]
        )[:10000]
        first = kmeans(points, 2, seed=fixture_seed)
        second = kmeans(points, 2, seed=fixture_seed)
        deterministic &= np.array_equal(first.labels, second.labels)
        deterministic &= np.array_equal(first.centroids, second.centroids)
        history = np.array(first.inertia_history)
        monotone &= bool((np.diff(history) <= 1e-9 * history[0]).all())

    pair = np.array([[0.0, 0.0, 0.0], [5.0, 1.0, 2.0]])
    forced = all(
        sorted(kmeans_pp_init(pair, 2, seed)[:, 0].tolist()) == [0.0, 5.0]
        for seed in range(100)
    )
    report(
        8,
        "k-means deterministic + inertia monotone on 10x10^4 points; "
        "2-point seeding forced for 100 seeds",
        deterministic and monotone and forced,
    )


def test_criterion_09_format_round_trips(tmp_path, gamma_bundle):
    # PCAL: loaded tables round-trip to identical bytes and arrays
    p1, p2 = tmp_path / "a.pcal", tmp_path / "b.pcal"
    save_table(gamma_bundle.table, p1)
    loaded = load_table(p1)
    save_table(loaded, p2)
    pcal_ok = p1.read_bytes() == p2.read_bytes()
    reloaded = load_table(p2)
    pcal_ok &= all(
        np.array_equal(getattr(loaded, f), getattr(reloaded, f))
        for f in ("breakpoints", "slopes", "shifts", "validity", "photon_totals")
    )

    # PMAP: float64 payload survives bitwise
    photons = gamma_bundle.corrected.photons
    write_pmap(photons, tmp_path / "m.pmap")
    pmap_ok = np.array_equal(read_pmap(tmp_path / "m.pmap"), photons)

    # PNG: 16-bit samples and the scale chunk survive bitwise
    frame = gamma_bundle.frame.intensities
    write_png(frame, tmp_path / "f.png", text={"photoncal:scale": repr(1234.5678)})
    buf = read_png(tmp_path / "f.png")
    png_ok = np.array_equal(buf.data, frame) and buf.scale == 1234.5678

    # spectrum CSV: shortest-repr floats reparse exactly
    rng = np.random.default_rng(0)
    spectrum = Spectrum(np.sort(rng.uniform(380, 720, 64)), rng.uniform(0, 2e4, 64))
    write_spectrum_csv(spectrum, tmp_path / "s.csv")
    back = read_spectrum_csv(tmp_path / "s.csv")
    csv_ok = np.array_equal(back.wavelengths_nm, spectrum.wavelengths_nm) and np.array_equal(
        back.values, spectrum.values
    )

    # corrupted magic rejected with located errors
    located = 0
    bad_pcal = tmp_path / "bad.pcal"
    bad_pcal.write_bytes(b"XCAL" + p1.read_bytes()[4:])
    try:
        load_table(bad_pcal)
    except FormatError as exc:
        located += exc.offset == 0
    bad_pmap = tmp_path / "bad.pmap"
    bad_pmap.write_bytes(b"XMAP" + (tmp_path / "m.pmap").read_bytes()[4:])
    try:
        read_pmap(bad_pmap)
    except FormatError as exc:
        located += exc.offset == 0
    bad_png = tmp_path / "bad.png"
    bad_png.write_bytes(b"XPNG" + (tmp_path / "f.png").read_bytes()[4:])
    try:
        read_png(bad_png)
    except FormatError as exc:
        located += exc.offset == 0

    report(
        9,
        "PCAL, PMAP, PNG, spectrum CSV round-trip bit-exact; bad magic located",
        pcal_ok and pmap_ok and png_ok and csv_ok and located == 3,
    )


def test_criterion_10_throughput():
    height, width, n = 2560, 2048, 6
    rng = np.random.default_rng(0)
    base = rng.uniform(20.0, 40.0, (height, width))
    means = [base * f for f in (0.0, 9.0, 28.0, 55.0, 90.0, 128.0)]
    means[0] = np.zeros((height, width))
    totals = np.array([0.0, 400.0, 1300.0, 2600.0, 4200.0, 6000.0])
    table = build_table(totals, means)
    frame = rng.integers(0, 4096, (height, width)).astype(np.uint16)

    single = min(
        _timed(lambda: correct(frame, table, workers=1)) for _ in range(2)
    )
    reference = correct(frame, table, workers=1)
    identical = True
    timings = {1: single}
    for workers in (2, 4, 8):
        best = None
        for _ in range(2):
            start = time.perf_counter()
            out = correct(frame, table, workers=workers)
            elapsed = time.perf_counter() - start
            best = elapsed if best is None else min(best, elapsed)
            identical &= np.array_equal(out.photons, reference.photons)
            identical &= np.array_equal(out.flags, reference.flags)
        timings[workers] = best

    speedup8 = single / timings[8]
    cores = os.cpu_count() or 1
    detail = (
        f"single {single * 1e3:.0f} ms, 8-worker speedup {speedup8:.2f}x on {cores} cores"
    )
    if cores >= 8:
        passed = single < 1.0 and identical and speedup8 >= 3.0
        report(10, "full-frame correction <1s, bit-identical, >=3x at 8 workers", passed, detail)
    else:
        report(
            10,
            "full-frame correction <1s and bit-identical across worker counts",
            single < 1.0 and identical,
            detail,
        )
        pytest.skip(
            f"8-worker >=3x speedup needs >=8 cores; host has {cores} "
            f"(measured {speedup8:.2f}x, scaling limited by hardware)"
        )


def _timed(fn):
    start = time.perf_counter()
    fn()
    return time.perf_counter() - start
