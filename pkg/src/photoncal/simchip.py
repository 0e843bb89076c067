"""Synthetic camera-chip simulator with exact ground truth.

The simulator stands in for the physical rig: it renders raw Bayer frames
from a scene (regions of a lamp spectrum at different luminances seen through
a gray-filter stack) through a parameterized chip (QE curves, vignetting,
per-pixel response, read noise, 12-bit quantizer), and returns the incident
photon totals it used, so the whole calibration pipeline can be checked
end to end.

Ground-truth photon maps hold the *incident* (source-side) photon totals,
the quantity the calibration reconstructs; vignetting and the pixel response
only shape the recorded intensities.

Noise uses counter-based per-row streams, so rendering is reproducible and
independent of any row-level parallelism.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .calibration import CalibrationFrameSet, build_table, photon_totals
from .correction import PhotonMap
from .errors import FormatError
from .mosaic import BAYER_PATTERNS, RawFrame, channel_map
from .spectral import Spectrum, overlap_grid, resample, weight, weighted_photon_total

QUANT_MAX = 4095  # 12-bit quantizer ceiling


def _row_normal(shape, sd, seed, context) -> np.ndarray:
    """Gaussian field from independent per-row Philox streams."""
    h, w = shape
    out = np.empty(shape)
    for y in range(h):
        key = np.array([seed & 0xFFFFFFFFFFFFFFFF, (context << 24) | y], dtype=np.uint64)
        rng = np.random.Generator(np.random.Philox(key=key))
        out[y] = rng.normal(0.0, sd, w)
    return out


@dataclass(frozen=True, eq=False)
class PowerResponse:
    """Per-pixel response intensity = gain_field * photons**gamma + offset.

    The gain field is gain * (1 + prnu), with pixel response non-uniformity
    drawn once from `prnu_seed`. Strictly increasing in photons.
    """

    gain: float = 1.0
    gamma: float = 1.0
    offset: float = 0.0
    prnu_sd: float = 0.0
    prnu_seed: int = 0

    def __post_init__(self):
        if self.gain <= 0 or self.gamma <= 0:
            raise ValueError("gain and gamma must be positive")

    def gain_field(self, shape) -> np.ndarray:
        if self.prnu_sd <= 0:
            return np.full(shape, self.gain)
        prnu = _row_normal(shape, self.prnu_sd, self.prnu_seed, context=0xFACE)
        # keep the response strictly increasing even in extreme draws
        return self.gain * np.maximum(1.0 + prnu, 0.05)

    def intensities(self, sensor_photons: np.ndarray, chip: "ChipModel") -> np.ndarray:
        return self.gain_field(sensor_photons.shape) * sensor_photons**self.gamma + self.offset


@dataclass(frozen=True, eq=False)
class KnottedLinearResponse:
    """Response that is exactly piecewise-linear between the filter settings.

    `photon_knots` holds the per-channel incident photon totals of the
    calibration settings (dark to open); each pixel's knots in sensor photons
    are those values scaled by its vignette factor. `intensity_knots` maps
    them to recorded intensities, either one shared (N,) vector or a
    per-pixel (H, W, N) array; values must increase strictly along the last
    axis. Ends extrapolate linearly.
    """

    photon_knots: np.ndarray     # (C, N) incident photon totals per channel
    intensity_knots: np.ndarray  # (N,) or (H, W, N)

    def __post_init__(self):
        pk = np.atleast_2d(np.asarray(self.photon_knots, dtype=np.float64))
        ik = np.asarray(self.intensity_knots, dtype=np.float64)
        if np.any(np.diff(pk, axis=-1) <= 0):
            raise ValueError("photon knots must strictly increase")
        if np.any(np.diff(ik, axis=-1) <= 0):
            raise ValueError("intensity knots must strictly increase")
        if ik.shape[-1] != pk.shape[-1]:
            raise ValueError("photon and intensity knots must have equal length")
        object.__setattr__(self, "photon_knots", pk)
        object.__setattr__(self, "intensity_knots", ik)

    def intensities(self, sensor_photons: np.ndarray, chip: "ChipModel") -> np.ndarray:
        shape = sensor_photons.shape
        n = self.photon_knots.shape[1]
        cmap = chip.channel_map() if self.photon_knots.shape[0] == 3 else np.zeros(shape, dtype=np.uint8)
        q = self.photon_knots[cmap] * chip.vignette_field()[:, :, None]  # (H, W, N)
        ik = np.broadcast_to(self.intensity_knots, shape + (n,))

        idx = np.zeros(shape, dtype=np.intp)
        for j in range(1, n - 1):
            idx += sensor_photons >= q[:, :, j]
        sel = idx[:, :, None]
        q0 = np.take_along_axis(q, sel, axis=2)[:, :, 0]
        q1 = np.take_along_axis(q, sel + 1, axis=2)[:, :, 0]
        i0 = np.take_along_axis(ik, sel, axis=2)[:, :, 0]
        i1 = np.take_along_axis(ik, sel + 1, axis=2)[:, :, 0]
        return i0 + (sensor_photons - q0) * ((i1 - i0) / (q1 - q0))


@dataclass(frozen=True, eq=False)
class ChipModel:
    """Synthetic sensor: geometry, QE curves, response, vignetting, noise."""

    width: int
    height: int
    pattern: str = "rggb"
    qe_curves: tuple = None  # (R, G, B) Spectrums; defaults created when None
    response: object = field(default_factory=PowerResponse)
    vignette_alpha: float = 0.0
    noise_sd: float = 0.0

    def __post_init__(self):
        if self.width % 2 or self.height % 2:
            raise ValueError("chip dimensions must be even")
        if self.pattern not in BAYER_PATTERNS:
            raise ValueError(f"unknown Bayer pattern {self.pattern!r}")
        if not 0.0 <= self.vignette_alpha < 1.0:
            raise ValueError("vignette_alpha must be in [0, 1)")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be non-negative")
        if self.qe_curves is None:
            object.__setattr__(self, "qe_curves", default_qe_curves())
        elif len(self.qe_curves) != 3:
            raise ValueError("qe_curves must be three spectra (R, G, B)")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def vignette_field(self) -> np.ndarray:
        """Radial attenuation 1 - alpha*(r/r_max)^2, 1.0 at the optical center."""
        cy, cx = (self.height - 1) / 2.0, (self.width - 1) / 2.0
        y = np.arange(self.height)[:, None] - cy
        x = np.arange(self.width)[None, :] - cx
        r2 = y * y + x * x
        return 1.0 - self.vignette_alpha * r2 / r2[0, 0]

    def channel_map(self) -> np.ndarray:
        return channel_map(self.shape, self.pattern)


@dataclass(frozen=True)
class Region:
    """A painted scene region with a luminance multiplier.

    Shapes: rect (x, y, w, h), disc (cx, cy, r), ellipse (cx, cy, rx, ry),
    annulus (cx, cy, r_inner, r_outer).
    """

    shape: str
    params: tuple
    luminance: float

    _ARITY = {"rect": 4, "disc": 3, "ellipse": 4, "annulus": 4}

    def __post_init__(self):
        if self.shape not in self._ARITY:
            raise ValueError(f"unknown region shape {self.shape!r}")
        if len(self.params) != self._ARITY[self.shape]:
            raise ValueError(f"{self.shape} takes {self._ARITY[self.shape]} parameters")
        if self.luminance < 0:
            raise ValueError("luminance must be non-negative")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))


@dataclass(frozen=True, eq=False)
class SceneSpec:
    """Scene radiance description plus the gray-filter stack.

    Each region's radiance is `luminance * base_spectrum`; uncovered pixels
    use `background_luminance` (0 means masked black). Filters are flat
    transmittances in [0, 1] or sampled transmittance curves, dark first,
    open last.
    """

    base_spectrum: Spectrum
    filters: tuple
    regions: tuple = ()
    background_luminance: float = 1.0

    def __post_init__(self):
        filters = tuple(self.filters)
        if len(filters) < 2:
            raise ValueError("need at least 2 filter settings (dark and open)")
        for i, f in enumerate(filters):
            if isinstance(f, Spectrum):
                if f.values.max() > 1.0:
                    raise ValueError(f"filter {i}: transmittance must stay within [0, 1]")
            elif not 0.0 <= float(f) <= 1.0:
                raise ValueError(f"filter {i}: transmittance {f} outside [0, 1]")
        if self.background_luminance < 0:
            raise ValueError("background luminance must be non-negative")
        object.__setattr__(self, "filters", filters)
        object.__setattr__(self, "regions", tuple(self.regions))

    @property
    def n_settings(self) -> int:
        return len(self.filters)


def region_map(scene: SceneSpec, shape) -> np.ndarray:
    """Region index per pixel: 0 for background, i+1 for scene.regions[i].

    Later regions paint over earlier ones. Region centers/origins must lie
    within the frame; radii and extents may clip at the edges.
    """
    h, w = shape
    out = np.zeros(shape, dtype=np.int32)
    yy = np.arange(h)[:, None]
    xx = np.arange(w)[None, :]
    for i, reg in enumerate(scene.regions, start=1):
        if reg.shape == "rect":
            x, y, rw, rh = reg.params
            if not (0 <= x < w and 0 <= y < h):
                raise ValueError(f"region {i}: rect origin ({x}, {y}) outside frame")
            out[int(y) : int(y + rh), int(x) : int(x + rw)] = i
        else:
            cx, cy = reg.params[0], reg.params[1]
            if not (0 <= cx < w and 0 <= cy < h):
                raise ValueError(f"region {i}: center ({cx}, {cy}) outside frame")
            if reg.shape == "ellipse":
                rx, ry = reg.params[2], reg.params[3]
                mask = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0
            else:
                r2 = (yy - cy) ** 2 + (xx - cx) ** 2
                if reg.shape == "disc":
                    mask = r2 <= reg.params[2] ** 2
                else:
                    mask = (r2 >= reg.params[2] ** 2) & (r2 <= reg.params[3] ** 2)
            out[mask] = i
    return out


def filtered_spectrum(base: Spectrum, transmittance) -> Spectrum:
    """Incident spectrum after one gray filter (scalar or sampled curve)."""
    if isinstance(transmittance, Spectrum):
        grid = overlap_grid(base, transmittance)
        return weight(resample(base, grid), resample(transmittance, grid))
    return base.scaled(float(transmittance))


@dataclass(frozen=True, eq=False)
class RenderResult:
    frame: RawFrame
    photons: PhotonMap             # ground truth: incident photon totals
    region_spectra: tuple          # filtered incident Spectrum per region (background first)


def _scene_photon_table(chip: ChipModel, scene: SceneSpec, transmittance) -> np.ndarray:
    """Incident photon totals per (region, channel), background in row 0."""
    lums = [scene.background_luminance] + [r.luminance for r in scene.regions]
    table = np.zeros((len(lums), 3))
    for ri, lum in enumerate(lums):
        spectrum = filtered_spectrum(scene.base_spectrum.scaled(lum), transmittance)
        for ci, qe in enumerate(chip.qe_curves):
            table[ri, ci] = weighted_photon_total(spectrum, qe)
    return table


def render(chip: ChipModel, scene: SceneSpec, filter_index: int, seed: int = 0) -> RenderResult:
    """Render one raw frame through a filter setting, with exact ground truth.

    Per pixel: incident photons come from its region's filtered spectrum seen
    through its Bayer channel's QE curve; the sensor sees them attenuated by
    the vignette; the response plus read noise is rounded and clipped into
    the 12-bit range.
    """
    if not 0 <= filter_index < scene.n_settings:
        raise ValueError(f"filter index {filter_index} out of range 0..{scene.n_settings - 1}")
    transmittance = scene.filters[filter_index]
    table = _scene_photon_table(chip, scene, transmittance)
    rmap = region_map(scene, chip.shape)
    cmap = chip.channel_map()
    incident = table[rmap, cmap]

    sensor = incident * chip.vignette_field()
    analog = chip.response.intensities(sensor, chip)
    if chip.noise_sd > 0:
        analog = analog + _row_normal(chip.shape, chip.noise_sd, seed, context=filter_index)
    frame = np.clip(np.floor(analog + 0.5), 0, QUANT_MAX).astype(np.uint16)

    spectra = tuple(
        filtered_spectrum(scene.base_spectrum.scaled(lum), transmittance)
        for lum in [scene.background_luminance] + [r.luminance for r in scene.regions]
    )
    truth = PhotonMap(incident, np.zeros(chip.shape, dtype=np.uint8))
    return RenderResult(RawFrame(frame, chip.pattern), truth, spectra)


@dataclass(frozen=True, eq=False)
class CalibrationCorpus:
    """Complete synthetic calibration input bundle."""

    frames: CalibrationFrameSet
    spectra: tuple            # incident flat-field Spectrum per setting, dark first
    qe_curves: tuple          # (R, G, B) Spectrums, echoed from the chip


def calibration_corpus(
    chip: ChipModel,
    scene: SceneSpec,
    n_settings: int | None = None,
    parallels: int = 6,
    seed: int = 0,
) -> CalibrationCorpus:
    """Render the calibration protocol: flat-field replicates per filter setting.

    Calibration frames view the bare light source (scene regions do not
    apply), matching how the physical procedure measures the lamp through
    each filter while the camera sees a flat field.
    """
    n = scene.n_settings if n_settings is None else int(n_settings)
    if n < 2:
        raise ValueError("need at least 2 calibration settings")
    if n > scene.n_settings:
        raise ValueError(f"scene defines only {scene.n_settings} filters")
    if parallels < 1:
        raise ValueError("parallels must be >= 1")

    vign = chip.vignette_field()
    cmap = chip.channel_map()
    stacks = []
    spectra = []
    for i in range(n):
        spectrum = filtered_spectrum(scene.base_spectrum, scene.filters[i])
        spectra.append(spectrum)
        totals = np.array([weighted_photon_total(spectrum, qe) for qe in chip.qe_curves])
        sensor = totals[cmap] * vign
        analog = chip.response.intensities(sensor, chip)
        stack = np.empty((parallels, chip.height, chip.width), dtype=np.uint16)
        for p in range(parallels):
            noisy = analog
            if chip.noise_sd > 0:
                noisy = analog + _row_normal(chip.shape, chip.noise_sd, seed, context=(1 + i) * 1024 + p)
            stack[p] = np.clip(np.floor(noisy + 0.5), 0, QUANT_MAX).astype(np.uint16)
        stacks.append(stack)
    return CalibrationCorpus(CalibrationFrameSet(tuple(stacks)), tuple(spectra), tuple(chip.qe_curves))


def corpus_table(corpus: CalibrationCorpus, pattern: str, **build_kwargs):
    """Run the calibration build on a simulated corpus: photon totals per
    channel from the spectra, mean frames from the stacks, then the table."""
    totals = np.stack([photon_totals(corpus.spectra, qe).values for qe in corpus.qe_curves])
    return build_table(totals, corpus.frames.mean_frames(), pattern, **build_kwargs)


# ---------------------------------------------------------------------------
# default spectra and reference fixtures

DEFAULT_RANGE_NM = (400.0, 700.0)
DEFAULT_FILTERS = (0.0, 0.08, 0.2, 0.42, 0.7, 1.0)


def default_lamp_spectrum(level: float = 1200.0, range_nm=DEFAULT_RANGE_NM, step_nm: float = 1.0) -> Spectrum:
    """Broad smooth lamp spectrum on a fine grid (counts per nm sample)."""
    lo, hi = range_nm
    w = np.arange(lo, hi + 0.5 * step_nm, step_nm)
    # gentle warm slope with a wide bump, nothing near zero
    rel = 0.75 + 0.25 * np.exp(-(((w - 580.0) / 120.0) ** 2)) + 0.10 * (w - lo) / (hi - lo)
    return Spectrum(w, level * rel)


def default_qe_curves(range_nm=DEFAULT_RANGE_NM, step_nm: float = 2.0) -> tuple:
    """Plausible R, G, B quantum-efficiency curves on a coarser grid."""
    lo, hi = range_nm
    w = np.arange(lo, hi + 0.5 * step_nm, step_nm)

    def bump(center, width, peak):
        return peak * np.exp(-(((w - center) / width) ** 2))

    red = bump(610.0, 60.0, 0.46) + bump(680.0, 80.0, 0.08)
    green = bump(540.0, 55.0, 0.52) + bump(460.0, 90.0, 0.05)
    blue = bump(465.0, 50.0, 0.50) + bump(420.0, 40.0, 0.10)
    return (Spectrum(w, red), Spectrum(w, green), Spectrum(w, blue))


def flat_scene(luminance: float = 1.0, filters=DEFAULT_FILTERS, lamp_level: float = 1200.0) -> SceneSpec:
    """Uniform field at the given luminance; the calibration view."""
    return SceneSpec(default_lamp_spectrum(lamp_level), filters, (), luminance)


def fish_scene(width: int = 640, height: int = 512, filters=DEFAULT_FILTERS, lamp_level: float = 1200.0) -> SceneSpec:
    """Nested-region test scene tuned to stress segmentation.

    Three concentric luminance regions over a masked-black background: a dim
    center blob, a bright middle ring, and an outer ring almost as bright.
    Render it on :func:`fish_chip` (strong vignette): the three recorded
    intensity modes then carry comparable mass at well-separated levels, so
    two-class clustering of the uncorrected frame has two stable optima and
    flips between them across seeds, while the corrected frame separates the
    two bright rings cleanly from the dim center for every seed. The
    luminances and band radii were tuned together against those two
    requirements; change them only in pairs.
    """
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    rmax = float(np.hypot(cx, cy))
    return SceneSpec(
        default_lamp_spectrum(lamp_level),
        filters,
        (
            Region("disc", (cx, cy, 0.30 * rmax), 0.15),
            Region("annulus", (cx, cy, 0.50 * rmax, 0.60 * rmax), 0.917),
            Region("annulus", (cx, cy, 0.75 * rmax, 0.84 * rmax), 0.80),
        ),
        background_luminance=0.0,
    )


def fish_chip(width: int = 640, height: int = 512, lamp_level: float = 1200.0) -> ChipModel:
    """The linear-response, strongly vignetted chip the fish scene is tuned for.

    Gain is set so an open-filter flat field peaks near 3800 counts at the
    image center.
    """
    qe = default_qe_curves()
    lamp = default_lamp_spectrum(lamp_level)
    a_open = max(weighted_photon_total(lamp, curve) for curve in qe)
    return ChipModel(
        width,
        height,
        "rggb",
        qe,
        PowerResponse(gain=3800.0 / a_open, gamma=1.0),
        vignette_alpha=0.75,
        noise_sd=0.0,
    )


def oracle_intensity_knots(shape, photon_knots_len: int, lo: float = 0.78, hi: float = 1.0) -> np.ndarray:
    """Per-pixel strictly increasing integer intensity knots for oracle chips.

    A horizontal gain gradient makes every column respond differently while
    keeping all knot intensities exactly representable integers, so a
    zero-noise render at a knot is reproduced bit-exactly after the 12-bit
    quantizer.
    """
    h, w = shape
    base = np.round(np.linspace(0.0, 3800.0, photon_knots_len))
    factor = lo + (hi - lo) * (np.arange(w) / max(w - 1, 1))
    knots = np.round(base[None, None, :] * factor[None, :, None])
    return np.broadcast_to(knots, (h, w, photon_knots_len)).copy()


def knotted_oracle_chip(
    width: int,
    height: int,
    scene: SceneSpec,
    pattern: str = "rggb",
    vignette_alpha: float = 0.3,
    intensity_knots: np.ndarray | None = None,
    qe_curves: tuple | None = None,
) -> ChipModel:
    """Zero-noise chip whose response is piecewise-linear with knots exactly
    at the scene's filter settings; the full pipeline reproduces its ground
    truth to floating-point accuracy."""
    qe = qe_curves if qe_curves is not None else default_qe_curves()
    knots = np.empty((3, scene.n_settings))
    for i, t in enumerate(scene.filters):
        spectrum = filtered_spectrum(scene.base_spectrum, t)
        for c in range(3):
            knots[c, i] = weighted_photon_total(spectrum, qe[c])
    if intensity_knots is None:
        intensity_knots = oracle_intensity_knots((height, width), scene.n_settings)
    return ChipModel(
        width,
        height,
        pattern,
        qe,
        KnottedLinearResponse(knots, intensity_knots),
        vignette_alpha,
        noise_sd=0.0,
    )


# ---------------------------------------------------------------------------
# key = value description files

def _parse_kv_lines(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    for i, line in enumerate(lines, start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise FormatError(path, f"expected `key = value`, got {stripped!r}", row=i)
        key, _, value = stripped.partition("=")
        yield i, key.strip().lower(), value.strip()


def parse_chip_file(path) -> ChipModel:
    """Build a ChipModel from a key=value description file.

    Recognized keys: width, height, pattern, vignette_alpha, noise_sd,
    response (only `power`), gain, gamma, offset, prnu_sd, prnu_seed, and
    qe_red/qe_green/qe_blue as spectrum CSV paths (all three or none).
    """
    from .imageio import read_spectrum_csv

    values: dict[str, str] = {}
    for row, key, value in _parse_kv_lines(path):
        values[key] = value
    try:
        width = int(values.pop("width"))
        height = int(values.pop("height"))
    except KeyError as exc:
        raise FormatError(path, f"missing required key {exc.args[0]}") from None
    pattern = values.pop("pattern", "rggb").lower()
    if values.pop("response", "power") != "power":
        raise FormatError(path, "only the `power` response is expressible in chip files")
    response = PowerResponse(
        gain=float(values.pop("gain", 1.0)),
        gamma=float(values.pop("gamma", 1.0)),
        offset=float(values.pop("offset", 0.0)),
        prnu_sd=float(values.pop("prnu_sd", 0.0)),
        prnu_seed=int(values.pop("prnu_seed", 0)),
    )
    qe_paths = [values.pop(k, None) for k in ("qe_red", "qe_green", "qe_blue")]
    if any(qe_paths) and not all(qe_paths):
        raise FormatError(path, "qe_red/qe_green/qe_blue must be given together")
    qe = tuple(read_spectrum_csv(p) for p in qe_paths) if all(qe_paths) else None
    alpha = float(values.pop("vignette_alpha", 0.0))
    noise = float(values.pop("noise_sd", 0.0))
    if values:
        raise FormatError(path, f"unknown keys: {', '.join(sorted(values))}")
    return ChipModel(width, height, pattern, qe, response, alpha, noise)


def parse_scene_file(path) -> SceneSpec:
    """Build a SceneSpec from a key=value description file.

    Recognized keys: lamp_level or lamp (spectrum CSV path), range_nm
    (`lo hi`), background, filters (whitespace-separated transmittances),
    and repeated `region = shape params... luminance` lines.
    """
    from .imageio import read_spectrum_csv

    lamp = None
    lamp_level = 1200.0
    range_nm = DEFAULT_RANGE_NM
    background = 1.0
    filters = None
    regions: list[Region] = []
    for row, key, value in _parse_kv_lines(path):
        if key == "lamp":
            lamp = read_spectrum_csv(value)
        elif key == "lamp_level":
            lamp_level = float(value)
        elif key == "range_nm":
            parts = value.split()
            if len(parts) != 2:
                raise FormatError(path, "range_nm takes two values", row=row)
            range_nm = (float(parts[0]), float(parts[1]))
        elif key == "background":
            background = float(value)
        elif key == "filters":
            filters = tuple(float(v) for v in value.split())
        elif key == "region":
            parts = value.split()
            if len(parts) < 3:
                raise FormatError(path, "region needs a shape, parameters, and a luminance", row=row)
            try:
                regions.append(Region(parts[0].lower(), tuple(float(p) for p in parts[1:-1]), float(parts[-1])))
            except ValueError as exc:
                raise FormatError(path, str(exc), row=row) from None
        else:
            raise FormatError(path, f"unknown key {key!r}", row=row)
    if filters is None:
        raise FormatError(path, "missing required key filters")
    base = lamp if lamp is not None else default_lamp_spectrum(lamp_level, range_nm)
    return SceneSpec(base, filters, tuple(regions), background)


def write_chip_file(chip: ChipModel, path, qe_paths=None) -> None:
    """Write a chip description; QE curves reference CSV paths when given."""
    r = chip.response
    if not isinstance(r, PowerResponse):
        raise ValueError("only power-response chips can be written to a file")
    lines = [
        "# photoncal chip description",
        f"width = {chip.width}",
        f"height = {chip.height}",
        f"pattern = {chip.pattern}",
        f"vignette_alpha = {chip.vignette_alpha!r}",
        f"noise_sd = {chip.noise_sd!r}",
        "response = power",
        f"gain = {r.gain!r}",
        f"gamma = {r.gamma!r}",
        f"offset = {r.offset!r}",
        f"prnu_sd = {r.prnu_sd!r}",
        f"prnu_seed = {r.prnu_seed}",
    ]
    if qe_paths is not None:
        for key, qe_path in zip(("qe_red", "qe_green", "qe_blue"), qe_paths):
            lines.append(f"{key} = {qe_path}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_scene_file(scene: SceneSpec, path, lamp_path=None, lamp_level=None) -> None:
    """Write a scene description.

    The lamp is referenced either as a spectrum CSV path or, when the scene
    was built from the default lamp, by its level; exactly one must be given.
    """
    lines = ["# photoncal scene description"]
    if lamp_path is not None:
        lines.append(f"lamp = {lamp_path}")
    elif lamp_level is not None:
        lines.append(f"lamp_level = {float(lamp_level)!r}")
    else:
        raise ValueError("scene files need either lamp_path or lamp_level")
    lines.append(f"background = {scene.background_luminance!r}")
    lines.append("filters = " + " ".join(repr(float(f)) for f in scene.filters))
    for reg in scene.regions:
        params = " ".join(repr(p) for p in reg.params)
        lines.append(f"region = {reg.shape} {params} {reg.luminance!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
