"""Point-velocimetry time series: parsing, features, radiograph comparison.

Velocities are in km/s throughout, which equals mm/us, so these numbers
compare directly with the per-column velocities from the image pipeline.

Feature extraction targets the four thickness trends visible in the
velocimeter records: plateau level, noise level, fluctuation magnitude,
and the onset time of the first fluctuation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DataError

DEFAULT_EXCEED_FACTOR = 3.0
DEFAULT_CONSECUTIVE = 3
DEFAULT_DETREND_HALFWIDTH = 5


@dataclass(frozen=True)
class VisarSeries:
    """Dense (time, velocity) record for one coupon."""

    t_us: np.ndarray
    v_km_s: np.ndarray
    thickness_in: float = 0.0
    label: str = ""

    def __post_init__(self):
        t = np.asarray(self.t_us, dtype=np.float64)
        v = np.asarray(self.v_km_s, dtype=np.float64)
        if t.ndim != 1 or t.shape != v.shape:
            raise DataError("time and velocity must be matching 1-D arrays")
        if t.size < 2:
            raise DataError("series needs at least 2 samples")
        if np.any(np.diff(t) <= 0):
            raise DataError("time must be strictly increasing")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "t_us", t)
        object.__setattr__(self, "v_km_s", v)

    def __len__(self):
        return self.t_us.size


@dataclass(frozen=True)
class FeatureSet:
    plateau_v_km_s: float
    noise_rms_km_s: float
    fluct_amplitude_km_s: float
    first_fluct_t_us: Optional[float]

    def to_dict(self) -> dict:
        return {
            "plateau_v_km_s": self.plateau_v_km_s,
            "noise_rms_km_s": self.noise_rms_km_s,
            "fluct_amplitude_km_s": self.fluct_amplitude_km_s,
            "first_fluct_t_us": self.first_fluct_t_us,
        }


def load_visar(path: str, thickness_in: float = 0.0, label: str = "") -> VisarSeries:
    """Parse a `time_us,velocity_km_s` CSV into a validated series."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["time_us", "velocity_km_s"]:
            raise DataError(f"bad header in {path}: expected time_us,velocity_km_s")
        ts, vs = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                ts.append(float(row[0]))
                vs.append(float(row[1]))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-numeric row {row}") from exc
    return VisarSeries(np.array(ts), np.array(vs),
                       thickness_in=thickness_in, label=label)


def save_visar(series: VisarSeries, path: str) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["time_us", "velocity_km_s"])
        for t, v in zip(series.t_us, series.v_km_s):
            writer.writerow([repr(float(t)), repr(float(v))])


def resample_linear(series: VisarSeries, t: float) -> float:
    """Piecewise-linear interpolant; no extrapolation outside the record."""
    if t < series.t_us[0] or t > series.t_us[-1]:
        raise DataError(
            f"t={t} outside series range [{series.t_us[0]}, {series.t_us[-1]}]"
        )
    return float(np.interp(t, series.t_us, series.v_km_s))


def _window_slice(series: VisarSeries, t0: float, t1: float):
    if t1 <= t0:
        raise DataError("window must have t1 > t0")
    keep = (series.t_us >= t0) & (series.t_us <= t1)
    if keep.sum() < 2:
        raise DataError("window holds fewer than 2 samples")
    return series.t_us[keep], series.v_km_s[keep]


def plateau_mean(series: VisarSeries, window) -> float:
    """Time-weighted mean (trapezoid rule) over [t0, t1]."""
    t, v = _window_slice(series, *window)
    return float(np.trapezoid(v, t) / (t[-1] - t[0]))


def _moving_average(v: np.ndarray, halfwidth: int) -> np.ndarray:
    # Centered window of half-width w, truncated at the series ends.
    kernel = np.ones(2 * halfwidth + 1)
    sums = np.convolve(v, kernel, mode="same")
    counts = np.convolve(np.ones_like(v), kernel, mode="same")
    return sums / counts


def noise_rms(series: VisarSeries,
              detrend_halfwidth: int = DEFAULT_DETREND_HALFWIDTH) -> float:
    """RMS of the residual after a centered moving-average detrend."""
    w = detrend_halfwidth
    if w < 1:
        raise DataError("detrend halfwidth must be >= 1")
    if len(series) <= 2 * w + 1:
        raise DataError(f"series too short for detrend halfwidth {w}")
    residual = series.v_km_s - _moving_average(series.v_km_s, w)
    return float(np.sqrt(np.mean(residual ** 2)))


def first_fluctuation_time(series: VisarSeries, baseline_window,
                           k: float = DEFAULT_EXCEED_FACTOR,
                           m: int = DEFAULT_CONSECUTIVE,
                           detrend_halfwidth: int = DEFAULT_DETREND_HALFWIDTH,
                           ) -> Optional[float]:
    """Earliest time the series leaves its baseline band for m straight samples.

    The band is plateau_mean +- k * noise_rms, both measured on the
    baseline window. Returns None when the series never departs.
    """
    if k <= 0 or m < 1:
        raise DataError("need k > 0 and m >= 1")
    t0, t1 = baseline_window
    bt, bv = _window_slice(series, t0, t1)
    base = VisarSeries(bt, bv)
    level = plateau_mean(series, baseline_window)
    sigma = noise_rms(base, detrend_halfwidth) if len(base) > 2 * detrend_halfwidth + 1 \
        else float(np.std(bv))
    after = series.t_us > t1
    # absolute epsilon so an exactly constant series never triggers on
    # trapezoid round-off when sigma is 0
    band = k * sigma + 1e-12 * max(1.0, abs(level))
    exceed = after & (np.abs(series.v_km_s - level) > band)
    run = 0
    for i in np.nonzero(after)[0]:
        run = run + 1 if exceed[i] else 0
        if run >= m:
            return float(series.t_us[i - m + 1])
    return None


def extract_features(series: VisarSeries, baseline_window,
                     k: float = DEFAULT_EXCEED_FACTOR,
                     m: int = DEFAULT_CONSECUTIVE,
                     detrend_halfwidth: int = DEFAULT_DETREND_HALFWIDTH,
                     ) -> FeatureSet:
    """Bundle the four trend features for one series.

    Fluctuation amplitude is the peak |v - plateau| after the detected
    onset, or 0 when no fluctuation is found.
    """
    plateau = plateau_mean(series, baseline_window)
    sigma = noise_rms(series, detrend_halfwidth)
    onset = first_fluctuation_time(series, baseline_window, k, m, detrend_halfwidth)
    if onset is None:
        amplitude = 0.0
    else:
        tail = series.v_km_s[series.t_us >= onset]
        amplitude = float(np.max(np.abs(tail - plateau)))
    return FeatureSet(plateau_v_km_s=plateau, noise_rms_km_s=sigma,
                      fluct_amplitude_km_s=amplitude, first_fluct_t_us=onset)


def compare_prad_visar(apex, series: VisarSeries) -> dict:
    """Residuals of image-derived apex velocities against the dense record.

    ``apex`` is a list of (t_us, v) pairs. Only apex times inside the
    series' time support are compared; no extrapolation.
    """
    diffs = []
    for t, v in apex:
        if series.t_us[0] <= t <= series.t_us[-1]:
            diffs.append(v - resample_linear(series, t))
    if not diffs:
        raise DataError("no apex samples inside the velocimeter time range")
    d = np.array(diffs)
    return {"n": int(d.size), "bias": float(d.mean()),
            "rms": float(np.sqrt(np.mean(d ** 2)))}
