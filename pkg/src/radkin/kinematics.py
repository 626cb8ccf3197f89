"""Surface profiles, per-column velocity fields, apex velocity, curvature.

Profiles use the physical y-up convention: pixel row 0 (top of the image)
maps to the maximum y. Velocities are per-column vertical displacements
between consecutive frames, in mm/us (numerically equal to km/s).

The quantization floor is one pixel pitch per frame interval (0.1 mm over
3 us is about 0.033 mm/us); the apex band average exists to damp it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegenerateFitError
from .imagecore import BinaryImage, PhysPoint
from .contour import ContourMask

DEFAULT_APEX_HALFWIDTH = 5


@dataclass(frozen=True)
class SurfaceProfile:
    """Per-column surface height at one frame midpoint.

    ``y_mm`` holds NaN where the column had no foreground.
    """

    time_us: float
    x_mm: np.ndarray
    y_mm: np.ndarray
    orientation: str = "from_top"

    def __post_init__(self):
        x = np.asarray(self.x_mm, dtype=np.float64)
        y = np.asarray(self.y_mm, dtype=np.float64)
        if x.shape != y.shape or x.ndim != 1:
            raise DataError("profile x/y must be matching 1-D arrays")
        if np.any(np.diff(x) <= 0):
            raise DataError("profile x must be strictly increasing")
        if not np.any(np.isfinite(y)):
            raise DataError("profile has no present columns")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x_mm", x)
        object.__setattr__(self, "y_mm", y)


@dataclass(frozen=True)
class VelocityField:
    """Per-column vertical velocity between two profiles, NaN where absent."""

    mid_time_us: float
    x_mm: np.ndarray
    v_mm_us: np.ndarray


@dataclass(frozen=True)
class CurvatureFit:
    center: PhysPoint
    radius_mm: float
    rms_residual_mm: float
    window: tuple


def _foreground_of(source) -> np.ndarray:
    if isinstance(source, ContourMask):
        return source.mask.foreground
    if isinstance(source, BinaryImage):
        return source.foreground
    raise DataError(f"expected BinaryImage or ContourMask, got {type(source).__name__}")


def surface_profile(source, direction: str, pitch: float,
                    time_us: float) -> SurfaceProfile:
    """First foreground row per column, scanned from the given side.

    ``direction`` is "from_top" or "from_bottom". Row r maps to
    y = (height-1-r) * pitch, so higher in the image means larger y.
    """
    fg = _foreground_of(source)
    if direction not in ("from_top", "from_bottom"):
        raise DataError(f"direction must be from_top|from_bottom, got {direction!r}")
    height, width = fg.shape
    any_fg = fg.any(axis=0)
    if direction == "from_top":
        first = fg.argmax(axis=0)
    else:
        first = height - 1 - fg[::-1, :].argmax(axis=0)
    y = np.where(any_fg, (height - 1 - first) * pitch, np.nan)
    x = np.arange(width) * pitch
    return SurfaceProfile(time_us=time_us, x_mm=x, y_mm=y, orientation=direction)


def velocity_field(p1: SurfaceProfile, p2: SurfaceProfile) -> VelocityField:
    """Per-column v = (y2 - y1) / (t2 - t1); NaN where either column is absent.

    Reversed argument order negates every sample (same mid time);
    coincident timestamps are an error.
    """
    if p2.time_us == p1.time_us:
        raise DataError("profiles have identical timestamps")
    if p1.x_mm.shape != p2.x_mm.shape or not np.allclose(p1.x_mm, p2.x_mm):
        raise DataError("profiles are on different column grids")
    # |dt| so that swapping the arguments negates every sample
    v = (p2.y_mm - p1.y_mm) / abs(p2.time_us - p1.time_us)
    return VelocityField(mid_time_us=0.5 * (p1.time_us + p2.time_us),
                         x_mm=p1.x_mm.copy(), v_mm_us=v)


def band_mean_velocity(field: VelocityField, center_x_mm: float,
                       half_width_cols: int) -> float:
    """Mean velocity over columns within +-half_width_cols of center_x_mm."""
    center_idx = int(np.argmin(np.abs(field.x_mm - center_x_mm)))
    lo = max(0, center_idx - half_width_cols)
    hi = min(field.x_mm.size, center_idx + half_width_cols + 1)
    band = field.v_mm_us[lo:hi]
    band = band[np.isfinite(band)]
    if band.size == 0:
        raise DataError("velocity band entirely absent")
    return float(band.mean())


def apex_velocity(profiles, center_x_mm: float,
                  half_width_cols: int = DEFAULT_APEX_HALFWIDTH) -> list:
    """Band-averaged central velocity per consecutive profile pair.

    Returns a list of (mid_time_us, v_mm_us). This is the radiographic
    analog of the point-velocimeter reading at the top-surface center.
    """
    profiles = list(profiles)
    if len(profiles) < 2:
        raise DataError("need at least two profiles")
    series = []
    for p1, p2 in zip(profiles, profiles[1:]):
        field = velocity_field(p1, p2)
        series.append((field.mid_time_us,
                       band_mean_velocity(field, center_x_mm, half_width_cols)))
    return series


def curvature_fit(profile: SurfaceProfile, window: tuple) -> CurvatureFit:
    """Algebraic least-squares circle (Kasa fit) over a column window.

    Solves x^2 + y^2 = 2 a x + 2 b y + c linearly; center (a, b),
    radius sqrt(c + a^2 + b^2). Raises DegenerateFitError for collinear
    points (infinite radius).
    """
    lo, hi = window
    x = profile.x_mm[lo:hi]
    y = profile.y_mm[lo:hi]
    keep = np.isfinite(y)
    x, y = x[keep], y[keep]
    if x.size < 3:
        raise DataError(f"need >= 3 present columns in window, got {x.size}")
    pts = np.column_stack([x, y])
    sv = np.linalg.svd(pts - pts.mean(axis=0), compute_uv=False)
    if sv[1] < 1e-9 * max(sv[0], 1.0):
        raise DegenerateFitError("collinear points: no finite circle")
    a_mat = np.column_stack([2 * x, 2 * y, np.ones_like(x)])
    rhs = x * x + y * y
    (ca, cb, cc), *_ = np.linalg.lstsq(a_mat, rhs, rcond=None)
    r2 = cc + ca * ca + cb * cb
    if r2 <= 0:
        raise DegenerateFitError("fit collapsed to non-positive radius")
    radius = float(np.sqrt(r2))
    residual = np.sqrt((x - ca) ** 2 + (y - cb) ** 2) - radius
    return CurvatureFit(center=PhysPoint(float(ca), float(cb)), radius_mm=radius,
                        rms_residual_mm=float(np.sqrt(np.mean(residual ** 2))),
                        window=(lo, hi))


# ---------------------------------------------------------------------------
# Delimited import/export.


def write_profiles_csv(profiles, path: str) -> None:
    import csv

    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["time_us", "x_mm", "y_mm"])
        for t, x, y in profile_csv_rows(profiles):
            writer.writerow([repr(float(t)), repr(float(x)),
                             y if y == "" else repr(float(y))])


def read_profiles_csv(path: str) -> list:
    """Rebuild SurfaceProfiles from a time_us,x_mm,y_mm export."""
    import csv

    groups = {}
    order = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["time_us", "x_mm", "y_mm"]:
            raise DataError(f"bad profile CSV header in {path}: {header}")
        for row in reader:
            if not row:
                continue
            t = float(row[0])
            if t not in groups:
                groups[t] = ([], [])
                order.append(t)
            groups[t][0].append(float(row[1]))
            groups[t][1].append(float(row[2]) if row[2] != "" else np.nan)
    profiles = []
    for t in order:
        xs, ys = groups[t]
        profiles.append(SurfaceProfile(time_us=t, x_mm=np.array(xs),
                                       y_mm=np.array(ys)))
    return profiles


def write_apex_csv(apex, path: str) -> None:
    import csv

    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["mid_time_us", "v_mm_us"])
        for t, v in apex:
            writer.writerow([repr(float(t)), repr(float(v))])


def read_apex_csv(path: str) -> list:
    import csv

    apex = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["mid_time_us", "v_mm_us"]:
            raise DataError(f"bad apex CSV header in {path}: {header}")
        for row in reader:
            if row:
                apex.append((float(row[0]), float(row[1])))
    return apex


def profile_csv_rows(profiles) -> list:
    rows = []
    for p in profiles:
        for x, y in zip(p.x_mm, p.y_mm):
            rows.append((p.time_us, float(x), "" if np.isnan(y) else float(y)))
    return rows


def velocity_csv_rows(fields) -> list:
    rows = []
    for f in fields:
        for x, v in zip(f.x_mm, f.v_mm_us):
            rows.append((f.mid_time_us, float(x), "" if np.isnan(v) else float(v)))
    return rows
