"""Synthetic radiograph and velocimetry generator with exact ground truth.

The scene is a melt-like geometry on a y-up physical canvas: a material
slab whose top surface rises at a constant speed and may grow a Gaussian
bulge at its center, plus an optional circular cap whose radius grows at
a constant rate. Rendering is binary material painting followed by the
radiographic artifact stack: motion blur from the finite exposure window,
edge ringing (under/overshoot), block grain, and per-pixel Gaussian noise.

Everything is driven by one integer seed through numpy's PCG64 generator;
per-frame streams are derived by mixing the seed with the frame index, so
frames can be rendered in any order (or in parallel) with identical bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DataError
from .imagecore import GrayImage
from .visar import VisarSeries


@dataclass(frozen=True)
class PhantomSpec:
    # canvas
    width_px: int = 256
    height_px: int = 256
    pixel_pitch_mm: float = 0.1
    # top surface: y_s(x, t) = y0 + v_s*t + A*t * exp(-(x-xc)^2 / (2 sigma^2))
    surface_enabled: bool = True
    y0_mm: float = 2.0
    v_s_mm_us: float = 1.0
    bulge_rate_mm_us: float = 0.0
    bulge_sigma_mm: float = 3.0
    bulge_center_x_mm: Optional[float] = None  # None -> canvas center
    # bubble cap: disk of radius R0 + v_b*t centered at (cx, cy0 + v_c*t)
    bubble_enabled: bool = False
    bubble_r0_mm: float = 4.0
    bubble_growth_mm_us: float = 0.0
    bubble_center_x_mm: Optional[float] = None
    bubble_center_y0_mm: float = 5.0
    bubble_rise_mm_us: float = 0.0
    # contrast (material is dark)
    background_intensity: float = 0.8
    material_intensity: float = 0.2
    # artifacts
    gaussian_sigma: float = 0.0
    grain_sigma: float = 0.0
    grain_cell_px: int = 3
    ringing_amplitude: float = 0.0
    ringing_width_px: int = 2
    exposure_us: float = 3.28
    substeps: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.width_px <= 0 or self.height_px <= 0 or self.pixel_pitch_mm <= 0:
            raise DataError("canvas geometry must be positive")
        if min(self.v_s_mm_us, self.bulge_rate_mm_us, self.bubble_growth_mm_us) < 0:
            raise DataError("speeds must be non-negative")
        for name in ("background_intensity", "material_intensity"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DataError(f"{name} must lie in [0, 1]")
        if self.substeps < 1:
            raise DataError("substeps must be >= 1")
        if self.exposure_us < 0:
            raise DataError("exposure must be non-negative")

    @property
    def center_x_mm(self) -> float:
        if self.bulge_center_x_mm is not None:
            return self.bulge_center_x_mm
        return 0.5 * (self.width_px - 1) * self.pixel_pitch_mm

    def surface_height_mm(self, x_mm: np.ndarray, t_us: float) -> np.ndarray:
        """Exact top-surface height y_s(x, t)."""
        bulge = self.bulge_rate_mm_us * t_us * np.exp(
            -((x_mm - self.center_x_mm) ** 2) / (2.0 * self.bulge_sigma_mm ** 2))
        return self.y0_mm + self.v_s_mm_us * t_us + bulge

    def surface_velocity_mm_us(self, x_mm: np.ndarray) -> np.ndarray:
        """Exact d y_s / dt, constant in time for this motion model."""
        bulge = self.bulge_rate_mm_us * np.exp(
            -((np.asarray(x_mm, dtype=float) - self.center_x_mm) ** 2)
            / (2.0 * self.bulge_sigma_mm ** 2))
        return self.v_s_mm_us + bulge

    def apex_velocity_mm_us(self) -> float:
        return self.v_s_mm_us + self.bulge_rate_mm_us

    def bubble_radius_mm(self, t_us: float) -> float:
        return self.bubble_r0_mm + self.bubble_growth_mm_us * t_us

    def bubble_center_mm(self, t_us: float) -> tuple:
        cx = self.bubble_center_x_mm
        if cx is None:
            cx = self.center_x_mm
        return cx, self.bubble_center_y0_mm + self.bubble_rise_mm_us * t_us


@dataclass(frozen=True)
class FrameTruth:
    """Exact geometry and kinematics at one frame midpoint."""

    time_us: float
    surface_y_mm: Optional[np.ndarray]
    apex_velocity_mm_us: float
    bubble_radius_mm: Optional[float]
    bubble_center_mm: Optional[tuple]


@dataclass(frozen=True)
class GroundTruth:
    x_mm: np.ndarray
    frames: tuple


def _phys_grid(spec: PhantomSpec):
    x = np.arange(spec.width_px) * spec.pixel_pitch_mm
    # row 0 is the top of the image -> maximum y
    y = (spec.height_px - 1 - np.arange(spec.height_px)) * spec.pixel_pitch_mm
    return x, y


def _paint(spec: PhantomSpec, t_us: float) -> np.ndarray:
    x, y = _phys_grid(spec)
    material = np.zeros((spec.height_px, spec.width_px), dtype=bool)
    if spec.surface_enabled:
        material |= y[:, None] <= spec.surface_height_mm(x, t_us)[None, :]
    if spec.bubble_enabled:
        cx, cy = spec.bubble_center_mm(t_us)
        r = spec.bubble_radius_mm(t_us)
        material |= (x[None, :] - cx) ** 2 + (y[:, None] - cy) ** 2 <= r * r
    return np.where(material, spec.material_intensity, spec.background_intensity)


def _ringing(grid: np.ndarray, amplitude: float, width: int) -> np.ndarray:
    # Wide-stencil second derivative subtracted from the image: sharpens
    # edges and leaves under/overshoot lobes on either side.
    if amplitude == 0.0:
        return grid
    pad = np.pad(grid, width, mode="edge")
    h, w = grid.shape
    d2v = pad[:h, width:width + w] - 2 * grid + pad[2 * width:, width:width + w]
    d2h = pad[width:width + h, :w] - 2 * grid + pad[width:width + h, 2 * width:]
    return grid - amplitude * (d2v + d2h)


def _frame_rng(spec: PhantomSpec, frame_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((spec.seed, frame_index)))


def render_frame(spec: PhantomSpec, t_start_us: float,
                 frame_index: int = 0) -> GrayImage:
    """Render one frame whose exposure opens at ``t_start_us``.

    The frame averages ``substeps`` instantaneous paints across the
    exposure window (motion blur), then applies ringing, grain, and
    Gaussian noise, clamped to [0, 1]. The timestamp is the exposure
    midpoint.
    """
    s = spec.substeps
    stack = [
        _paint(spec, t_start_us + (j + 0.5) / s * spec.exposure_us)
        for j in range(s)
    ]
    if all(np.array_equal(p, stack[0]) for p in stack[1:]):
        # static scene: skip averaging so the result is bit-identical
        # regardless of the substep count
        grid = stack[0]
    else:
        grid = np.mean(stack, axis=0)
    grid = _ringing(grid, spec.ringing_amplitude, spec.ringing_width_px)

    rng = _frame_rng(spec, frame_index)
    if spec.grain_sigma > 0:
        cell = spec.grain_cell_px
        n_r = -(-spec.height_px // cell)
        n_c = -(-spec.width_px // cell)
        cells = 1.0 + spec.grain_sigma * rng.standard_normal((n_r, n_c))
        factor = np.repeat(np.repeat(cells, cell, axis=0), cell, axis=1)
        grid = grid * factor[:spec.height_px, :spec.width_px]
    if spec.gaussian_sigma > 0:
        grid = grid + spec.gaussian_sigma * rng.standard_normal(grid.shape)

    np.clip(grid, 0.0, 1.0, out=grid)
    return GrayImage(grid, pixel_pitch_mm=spec.pixel_pitch_mm,
                     time_us=t_start_us + 0.5 * spec.exposure_us,
                     exposure_us=spec.exposure_us)


def generate_sequence(spec: PhantomSpec, frame_times) -> tuple:
    """Frames for each exposure-start time plus exact midpoint truth."""
    frame_times = list(frame_times)
    if any(b <= a for a, b in zip(frame_times, frame_times[1:])):
        raise DataError("frame times must be strictly increasing")
    x, _ = _phys_grid(spec)
    frames, truths = [], []
    for i, t_start in enumerate(frame_times):
        frames.append(render_frame(spec, t_start, frame_index=i))
        t_mid = t_start + 0.5 * spec.exposure_us
        truths.append(FrameTruth(
            time_us=t_mid,
            surface_y_mm=spec.surface_height_mm(x, t_mid) if spec.surface_enabled else None,
            apex_velocity_mm_us=spec.apex_velocity_mm_us() if spec.surface_enabled else 0.0,
            bubble_radius_mm=spec.bubble_radius_mm(t_mid) if spec.bubble_enabled else None,
            bubble_center_mm=spec.bubble_center_mm(t_mid) if spec.bubble_enabled else None,
        ))
    return frames, GroundTruth(x_mm=x, frames=tuple(truths))


def spec_from_mapping(mapping: dict) -> PhantomSpec:
    """Build a PhantomSpec from string or native values, type-coerced."""
    import dataclasses

    kwargs = {}
    fields = {f.name: f for f in dataclasses.fields(PhantomSpec)}
    for key, value in mapping.items():
        if key not in fields:
            raise DataError(f"unknown phantom spec key {key!r}")
        hint = fields[key].type
        if isinstance(value, str):
            if "bool" in hint:
                value = value.strip().lower() in ("1", "true", "yes")
            elif "int" in hint:
                value = int(value)
            elif "Optional[float]" in hint:
                value = None if value.strip().lower() == "none" else float(value)
            else:
                value = float(value)
        kwargs[key] = value
    return PhantomSpec(**kwargs)


def load_spec(path: str) -> PhantomSpec:
    """Read a key=value phantom spec file."""
    mapping = {}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise DataError(f"{path}: malformed line {line!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            mapping[key] = value
    return spec_from_mapping(mapping)


def generate_visar(spec: PhantomSpec, sample_period_us: float, t_end_us: float,
                   fluct_onset_us: float = np.inf, fluct_amplitude: float = 0.0,
                   fluct_frequency_per_us: float = 0.25,
                   fluct_damping_per_us: float = 0.0,
                   noise_sigma: float = 0.0) -> VisarSeries:
    """Plateau-then-oscillation velocity record mimicking the sensor.

    v(t) = v_s + [t >= t_f] * A * exp(-d (t - t_f)) * sin(2 pi f (t - t_f))
    plus seeded Gaussian noise.
    """
    if sample_period_us <= 0:
        raise DataError("sample period must be positive")
    t = np.arange(0.0, t_end_us + 0.5 * sample_period_us, sample_period_us)
    if t.size < 2:
        raise DataError("record spans fewer than 2 samples")
    v = np.full(t.shape, spec.v_s_mm_us)
    after = t >= fluct_onset_us
    dt = t[after] - fluct_onset_us
    v[after] += (fluct_amplitude * np.exp(-fluct_damping_per_us * dt)
                 * np.sin(2 * np.pi * fluct_frequency_per_us * dt))
    if noise_sigma > 0:
        # stream index 951 keeps the record independent of frame streams
        rng = np.random.default_rng(np.random.SeedSequence((spec.seed, 951)))
        v = v + noise_sigma * rng.standard_normal(v.shape)
    return VisarSeries(t, v, label="phantom")
