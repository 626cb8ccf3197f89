"""Contour extraction by thresholding + one-pixel erosion.

Gradient-based edge detection fails on blurry low-contrast radiographs;
instead the grayscale frame is cut to a 1-bit mask at a (manually chosen)
threshold, the foreground is eroded one pixel deep, and the eroded set is
subtracted from the original mask. What remains is the set of foreground
pixels touching the background: a continuous one-pixel contour.

Foreground means dense/dark material (intensity <= threshold). The image
border counts as background, so objects touching the frame get a contour
along the frame edge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DataError
from .imagecore import BinaryImage, GrayImage, PhysPoint, PixelCoord

_STRUCT_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_STRUCT_8 = np.ones((3, 3), dtype=bool)

STRUCTURE_LABELS = ("top_surface", "bubble", "bottom", "trunk",
                    "horizontal_structure", "unknown")


@dataclass(frozen=True)
class ContourMask:
    """One-pixel-wide contour grid plus the threshold that produced it."""

    mask: BinaryImage
    source_threshold: float
    connectivity: int = 4


@dataclass(frozen=True)
class Contour:
    """Ordered boundary curve in physical coordinates."""

    points: tuple
    time_us: float = 0.0
    structure_label: str = "unknown"
    closed: bool = False


def _structure(connectivity: int) -> np.ndarray:
    if connectivity == 4:
        return _STRUCT_4
    if connectivity == 8:
        return _STRUCT_8
    raise DataError(f"connectivity must be 4 or 8, got {connectivity}")


def binarize(img: GrayImage, threshold: float) -> BinaryImage:
    """Foreground where intensity <= threshold (dark = dense material)."""
    return BinaryImage(img.pixels <= threshold, threshold_used=threshold)


def erode_once(bin_img: BinaryImage, connectivity: int = 4) -> BinaryImage:
    """Erode foreground one pixel deep; out-of-image neighbors are background."""
    struct = _structure(connectivity)
    eroded = ndimage.binary_erosion(bin_img.foreground, structure=struct,
                                    border_value=0)
    return BinaryImage(eroded, threshold_used=bin_img.threshold_used)


def one_bit_erosion(img: GrayImage, threshold: float,
                    connectivity: int = 4) -> ContourMask:
    """Contour = binarized foreground minus its one-pixel erosion."""
    fg = binarize(img, threshold)
    eroded = erode_once(fg, connectivity)
    contour = fg.foreground & ~eroded.foreground
    return ContourMask(BinaryImage(contour, threshold_used=threshold),
                       source_threshold=threshold, connectivity=connectivity)


def threshold_sweep(img: GrayImage, thresholds,
                    connectivity: int = 4) -> list:
    """One contour mask per threshold; thresholds must strictly increase."""
    thresholds = list(thresholds)
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise DataError("thresholds must be strictly increasing")
    return [one_bit_erosion(img, t, connectivity) for t in thresholds]


def even_threshold_sweep(img: GrayImage, n: int,
                         lo: float = 0.0, hi: float = 1.0,
                         connectivity: int = 4) -> list:
    """Convenience sweep over n evenly spaced thresholds in (lo, hi)."""
    if n < 1:
        raise DataError("need at least one threshold")
    ts = np.linspace(lo, hi, n + 2)[1:-1]
    return threshold_sweep(img, ts.tolist(), connectivity)


def _component_anchor(labels: np.ndarray, lab: int) -> tuple:
    rows, cols = np.nonzero(labels == lab)
    i = np.lexsort((cols, rows))[0]
    return int(rows[i]), int(cols[i])


def select_component(bin_img: BinaryImage, mode="largest",
                     connectivity: int = 4) -> BinaryImage:
    """Keep one connected component: the largest, or the one holding a seed.

    ``mode`` is the string "largest" or a PixelCoord seed. Size ties go to
    the component whose topmost-leftmost pixel is lexicographically
    smallest in (row, col).
    """
    struct = _structure(connectivity)
    labels, n = ndimage.label(bin_img.foreground, structure=struct)
    if n == 0:
        raise DataError("empty foreground: no components")
    if isinstance(mode, PixelCoord):
        if not (0 <= mode.row < bin_img.height_px and 0 <= mode.col < bin_img.width_px):
            raise DataError(f"seed {mode} outside image")
        lab = labels[mode.row, mode.col]
        if lab == 0:
            raise DataError(f"seed {mode} lies on background")
    elif mode == "largest":
        counts = np.bincount(labels.ravel())[1:]
        best = counts.max()
        tied = [i + 1 for i, c in enumerate(counts) if c == best]
        lab = min(tied, key=lambda l: _component_anchor(labels, l))
    else:
        raise DataError(f"unknown selection mode {mode!r}")
    return BinaryImage(labels == lab, threshold_used=bin_img.threshold_used)


# Moore neighborhood in clockwise order for image coordinates (row down):
# E, SE, S, SW, W, NW, N, NE as (drow, dcol).
_MOORE_CW = ((0, 1), (1, 1), (1, 0), (1, -1),
             (0, -1), (-1, -1), (-1, 0), (-1, 1))


def trace_boundary(cmask: ContourMask, anchor: PixelCoord,
                   structure_label: str = "unknown",
                   pitch: float = None, time_us: float = 0.0) -> Contour:
    """Walk the contour component containing ``anchor`` into an ordered curve.

    Starts at the component's topmost-leftmost pixel and prefers clockwise
    Moore neighbors, visiting each contour pixel once. ``closed`` is set
    when the walk ends adjacent to its start (a ring rather than a ridge).
    """
    fg = cmask.mask.foreground
    if not (0 <= anchor.row < fg.shape[0] and 0 <= anchor.col < fg.shape[1]) \
            or not fg[anchor.row, anchor.col]:
        raise DataError(f"anchor {anchor} is not on the contour")
    labels, _ = ndimage.label(fg, structure=_STRUCT_8)
    lab = labels[anchor.row, anchor.col]
    component = labels == lab
    n_pixels = int(component.sum())
    start = _component_anchor(labels, lab)

    visited = {start}
    path = [start]
    heading = 0  # index into _MOORE_CW of the last move; start looking east
    cur = start
    while len(visited) < n_pixels:
        moved = False
        for turn in range(8):
            # Resume the clockwise scan just behind the incoming direction.
            k = (heading + 6 + turn) % 8
            dr, dc = _MOORE_CW[k]
            nxt = (cur[0] + dr, cur[1] + dc)
            if not (0 <= nxt[0] < fg.shape[0] and 0 <= nxt[1] < fg.shape[1]):
                continue
            if component[nxt] and nxt not in visited:
                visited.add(nxt)
                path.append(nxt)
                cur = nxt
                heading = k
                moved = True
                break
        if not moved:
            break

    last = path[-1]
    adjacent = max(abs(last[0] - start[0]), abs(last[1] - start[1])) == 1
    closed = n_pixels == 1 or (len(path) >= 3 and adjacent)
    scale = pitch if pitch is not None else 1.0
    points = tuple(PhysPoint(c * scale, r * scale) for r, c in path)
    return Contour(points=points, time_us=time_us,
                   structure_label=structure_label, closed=closed)


def contours_to_csv_rows(contours) -> list:
    """Flatten contours into (frame_time_us, structure_label, point_index, x_mm, y_mm)."""
    rows = []
    for contour in contours:
        for i, p in enumerate(contour.points):
            rows.append((contour.time_us, contour.structure_label, i, p.x_mm, p.y_mm))
    return rows
