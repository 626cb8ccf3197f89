"""Per-experiment records and the thickness-indexed feature table.

Each coupon thickness yields one record combining whichever sensors were
available; the table lines the extracted features up against thickness so
gaps can be interpolated and the qualitative thickness trends checked:
thicker coupons show a lower plateau velocity, more noise, larger
fluctuations, and a later fluctuation onset.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import contour, kinematics, visar
from .errors import ConfigError, DataError
from .imagecore import GrayImage, load_gray_with_sidecar

FEATURE_NAMES = ("plateau_v", "noise_rms", "fluct_amplitude",
                 "first_fluct_t", "mean_apex_v")

# trend direction with increasing thickness: -1 decreasing, +1 increasing
TREND_DIRECTIONS = {
    "plateau_v": -1,
    "noise_rms": +1,
    "fluct_amplitude": +1,
    "first_fluct_t": +1,
}


@dataclass
class ExperimentRecord:
    thickness_in: float
    frames: list = field(default_factory=list)
    visar_series: Optional[visar.VisarSeries] = None
    features: Optional[visar.FeatureSet] = None
    prad_apex: Optional[list] = None

    def __post_init__(self):
        if self.thickness_in <= 0:
            raise DataError("thickness must be positive")
        if not self.frames and self.visar_series is None and self.prad_apex is None:
            raise DataError("record has no data source")


@dataclass(frozen=True)
class FeatureTable:
    """Rows sorted by thickness; NaN marks a missing cell."""

    thickness_in: np.ndarray
    columns: dict

    def __post_init__(self):
        th = np.asarray(self.thickness_in, dtype=np.float64)
        if np.unique(th).size != th.size:
            raise DataError("duplicate thickness keys")
        object.__setattr__(self, "thickness_in", th)

    def column(self, feature: str) -> np.ndarray:
        if feature not in self.columns:
            raise DataError(f"unknown feature {feature!r}")
        return self.columns[feature]


def parse_descriptor(path: str) -> dict:
    """Read a key=value experiment descriptor.

    Recognized keys: thickness_in, frames (comma-separated paths), visar
    (CSV path), threshold, connectivity, direction, baseline_t0,
    baseline_t1, apex_center_x_mm, apex_halfwidth_cols, fluct_k, fluct_m,
    detrend_halfwidth. Relative paths resolve against the descriptor's
    directory.
    """
    if not os.path.exists(path):
        raise ConfigError(f"no such descriptor: {path}")
    base = os.path.dirname(os.path.abspath(path))
    desc = {}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}: malformed line {line!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            desc[key] = value
    if not desc:
        raise ConfigError(f"{path}: empty descriptor")
    if "frames" in desc:
        desc["frames"] = [os.path.join(base, p.strip())
                          for p in desc["frames"].split(",") if p.strip()]
    if "visar" in desc:
        desc["visar"] = os.path.join(base, desc["visar"])
    return desc


def build_record(desc: dict) -> ExperimentRecord:
    """Load a descriptor's data and run both feature pipelines."""
    try:
        thickness = float(desc["thickness_in"])
    except KeyError as exc:
        raise ConfigError("descriptor lacks thickness_in") from exc

    frames = []
    for p in desc.get("frames", []):
        if not os.path.exists(p):
            raise ConfigError(f"missing frame file: {p}")
        frames.append(load_gray_with_sidecar(p))

    series = None
    features = None
    if "visar" in desc:
        series = visar.load_visar(desc["visar"], thickness_in=thickness)
        t0 = float(desc.get("baseline_t0", series.t_us[0]))
        t1 = float(desc.get("baseline_t1",
                            series.t_us[0] + 0.25 * (series.t_us[-1] - series.t_us[0])))
        features = visar.extract_features(
            series, (t0, t1),
            k=float(desc.get("fluct_k", visar.DEFAULT_EXCEED_FACTOR)),
            m=int(desc.get("fluct_m", visar.DEFAULT_CONSECUTIVE)),
            detrend_halfwidth=int(desc.get("detrend_halfwidth",
                                           visar.DEFAULT_DETREND_HALFWIDTH)))

    apex = None
    if len(frames) >= 2:
        threshold = float(desc.get("threshold", 0.5))
        direction = desc.get("direction", "from_top")
        profiles = [
            kinematics.surface_profile(contour.binarize(f, threshold), direction,
                                       f.pixel_pitch_mm, f.time_us)
            for f in frames
        ]
        center = float(desc.get("apex_center_x_mm",
                                0.5 * (frames[0].width_px - 1) * frames[0].pixel_pitch_mm))
        halfwidth = int(desc.get("apex_halfwidth_cols",
                                 kinematics.DEFAULT_APEX_HALFWIDTH))
        apex = kinematics.apex_velocity(profiles, center, halfwidth)

    return ExperimentRecord(thickness_in=thickness, frames=frames,
                            visar_series=series, features=features,
                            prad_apex=apex)


def feature_table(records) -> FeatureTable:
    """One row per record, sorted by thickness; absent sources become NaN."""
    records = list(records)
    if not records:
        raise DataError("need at least one record")
    records.sort(key=lambda r: r.thickness_in)
    th = np.array([r.thickness_in for r in records])
    cols = {name: np.full(len(records), np.nan) for name in FEATURE_NAMES}
    for i, rec in enumerate(records):
        if rec.features is not None:
            fs = rec.features
            cols["plateau_v"][i] = fs.plateau_v_km_s
            cols["noise_rms"][i] = fs.noise_rms_km_s
            cols["fluct_amplitude"][i] = fs.fluct_amplitude_km_s
            if fs.first_fluct_t_us is not None:
                cols["first_fluct_t"][i] = fs.first_fluct_t_us
        if rec.prad_apex:
            cols["mean_apex_v"][i] = float(np.mean([v for _, v in rec.prad_apex]))
    return FeatureTable(thickness_in=th, columns=cols)


def interpolate_missing(table: FeatureTable, feature: str, thickness: float) -> float:
    """Piecewise-linear estimate of a feature at an unmeasured thickness."""
    col = table.column(feature)
    keep = np.isfinite(col)
    if keep.sum() < 2:
        raise DataError(f"fewer than 2 values present for {feature!r}")
    th = table.thickness_in[keep]
    vals = col[keep]
    if thickness < th[0] or thickness > th[-1]:
        raise DataError(
            f"thickness {thickness} outside data range [{th[0]}, {th[-1]}]")
    return float(np.interp(thickness, th, vals))


def trend_report(table: FeatureTable) -> dict:
    """Check the four thickness trends by weak monotonicity.

    A trend passes when every consecutive pair of present values moves in
    the stated direction (ties allowed). Violating pairs are listed as
    (thickness_a, thickness_b, value_a, value_b).
    """
    report = {"trends": {}, "all_pass": True}
    for feature, direction in TREND_DIRECTIONS.items():
        col = table.column(feature)
        keep = np.isfinite(col)
        if keep.sum() < 3:
            raise DataError(f"need >= 3 rows with {feature!r} present, "
                            f"got {int(keep.sum())}")
        th = table.thickness_in[keep]
        vals = col[keep]
        violations = []
        for a in range(len(vals) - 1):
            if direction * (vals[a + 1] - vals[a]) < 0:
                violations.append((float(th[a]), float(th[a + 1]),
                                   float(vals[a]), float(vals[a + 1])))
        passed = not violations
        report["trends"][feature] = {
            "direction": "increasing" if direction > 0 else "decreasing",
            "passed": passed,
            "violations": violations,
        }
        report["all_pass"] = report["all_pass"] and passed
    return report


def table_to_csv(table: FeatureTable, path: str) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["thickness_in", *FEATURE_NAMES])
        for i, th in enumerate(table.thickness_in):
            row = [repr(float(th))]
            for name in FEATURE_NAMES:
                v = table.columns[name][i]
                row.append("" if np.isnan(v) else repr(float(v)))
            writer.writerow(row)
