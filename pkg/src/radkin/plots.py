"""Static figure rendering for the report path.

All figures are written as SVG files next to the delimited outputs.
Rendering is pinned deterministic: fixed hash salt for element ids and no
embedded creation date, so reruns produce byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

matplotlib.rcParams["svg.hashsalt"] = "radkin"

_SAVE_KW = {"metadata": {"Date": None}, "format": "svg"}


def _finish(fig, path: str) -> None:
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def plot_profiles(profiles, path: str, title: str = "Surface evolution") -> None:
    """Overlaid surface profiles, one line per frame, colored by time."""
    profiles = list(profiles)
    fig, ax = plt.subplots(figsize=(6, 4))
    cmap = plt.get_cmap("viridis")
    n = max(len(profiles) - 1, 1)
    for i, p in enumerate(profiles):
        ax.plot(p.x_mm, p.y_mm, color=cmap(i / n), lw=1.2,
                label=f"t = {p.time_us:g} us" if len(profiles) <= 8 else None)
    ax.set_xlabel("x (mm)")
    ax.set_ylabel("y (mm)")
    ax.set_title(title)
    if len(profiles) <= 8:
        ax.legend(fontsize=8)
    _finish(fig, path)


def plot_velocity_fields(fields, path: str,
                         title: str = "Velocity vs position") -> None:
    fields = list(fields)
    fig, ax = plt.subplots(figsize=(6, 4))
    cmap = plt.get_cmap("viridis")
    n = max(len(fields) - 1, 1)
    for i, f in enumerate(fields):
        ax.plot(f.x_mm, f.v_mm_us, color=cmap(i / n), lw=1.2,
                label=f"t = {f.mid_time_us:g} us" if len(fields) <= 8 else None)
    ax.set_xlabel("x (mm)")
    ax.set_ylabel("v (mm/us)")
    ax.set_title(title)
    if len(fields) <= 8:
        ax.legend(fontsize=8)
    _finish(fig, path)


def plot_time_series(t, v, path: str, title: str = "Velocity record",
                     overlay=None) -> None:
    """Velocity against time, optionally with a second (t, v) overlay."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.asarray(t), np.asarray(v), lw=1.0, label="record")
    if overlay is not None:
        ot, ov = overlay
        ax.plot(np.asarray(ot), np.asarray(ov), "o--", ms=4, lw=1.0,
                label="image-derived apex")
        ax.legend(fontsize=8)
    ax.set_xlabel("t (us)")
    ax.set_ylabel("v (km/s)")
    ax.set_title(title)
    _finish(fig, path)


def plot_contours(contours, path: str, title: str = "Detected contours") -> None:
    fig, ax = plt.subplots(figsize=(5, 5))
    cmap = plt.get_cmap("viridis")
    n = max(len(list(contours)) - 1, 1)
    for i, c in enumerate(contours):
        xs = [p.x_mm for p in c.points]
        ys = [p.y_mm for p in c.points]
        if c.closed and xs:
            xs.append(xs[0])
            ys.append(ys[0])
        ax.plot(xs, ys, color=cmap(i / n), lw=1.0)
    ax.invert_yaxis()  # contour points carry pixel-space y (row down)
    ax.set_aspect("equal")
    ax.set_xlabel("x (mm)")
    ax.set_ylabel("y (mm, image orientation)")
    ax.set_title(title)
    _finish(fig, path)


def plot_feature_trends(table, path: str) -> None:
    """2x2 panel of the four trend features against coupon thickness."""
    from .fusion import TREND_DIRECTIONS

    fig, axes = plt.subplots(2, 2, figsize=(8, 6))
    for ax, (feature, direction) in zip(axes.ravel(), TREND_DIRECTIONS.items()):
        col = table.column(feature)
        keep = np.isfinite(col)
        ax.plot(table.thickness_in[keep], col[keep], "o-", lw=1.2)
        arrow = "increasing" if direction > 0 else "decreasing"
        ax.set_title(f"{feature} (expected {arrow})", fontsize=9)
        ax.set_xlabel("thickness (in)")
    fig.tight_layout()
    _finish(fig, path)
