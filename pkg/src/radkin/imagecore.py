"""Image containers, physical-coordinate conversion, and raster I/O.

Intensity convention: dense material attenuates the beam, so material is
DARK (low intensity). All downstream thresholding relies on this.

Pixel row 0 is the top of the image; y increases downward in pixel space.
Physical y-up flips happen in the kinematics layer, not here.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError

DEFAULT_PITCH_MM = 0.1


@dataclass(frozen=True)
class PixelCoord:
    col: int
    row: int


@dataclass(frozen=True)
class PhysPoint:
    x_mm: float
    y_mm: float


@dataclass(frozen=True)
class GrayImage:
    """Timestamped grayscale frame with physical pixel pitch.

    ``pixels`` is a float64 array of shape (height, width) with values
    in [0, 1]. ``time_us`` is the exposure-midpoint timestamp.
    ``roi_offset`` records the parent-frame origin of a cropped view so
    physical coordinates stay consistent after crop_roi.
    """

    pixels: np.ndarray
    pixel_pitch_mm: float = DEFAULT_PITCH_MM
    time_us: float = 0.0
    exposure_us: float = 0.0
    roi_offset: PixelCoord = field(default_factory=lambda: PixelCoord(0, 0))

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 2 or px.size == 0:
            raise DataError(f"expected a non-empty 2-D grid, got shape {px.shape}")
        if px.min() < 0.0 or px.max() > 1.0:
            raise DataError("intensities must lie in [0, 1]")
        if self.pixel_pitch_mm <= 0:
            raise DataError("pixel_pitch_mm must be positive")
        if self.exposure_us < 0:
            raise DataError("exposure_us must be non-negative")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width_px(self) -> int:
        return self.pixels.shape[1]

    @property
    def height_px(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class BinaryImage:
    """Thresholded foreground grid. Foreground = dense/dark material."""

    foreground: np.ndarray
    threshold_used: float = 0.0

    def __post_init__(self):
        fg = np.asarray(self.foreground, dtype=bool)
        if fg.ndim != 2 or fg.size == 0:
            raise DataError(f"expected a non-empty 2-D grid, got shape {fg.shape}")
        fg.setflags(write=False)
        object.__setattr__(self, "foreground", fg)

    @property
    def width_px(self) -> int:
        return self.foreground.shape[1]

    @property
    def height_px(self) -> int:
        return self.foreground.shape[0]


def to_physical(c: PixelCoord, pitch: float) -> PhysPoint:
    """Map a pixel coordinate to millimetres (pixel-space orientation)."""
    if pitch <= 0:
        raise DataError("pitch must be positive")
    return PhysPoint(c.col * pitch, c.row * pitch)


def crop_roi(img: GrayImage, col0: int, row0: int, cols: int, rows: int) -> GrayImage:
    """Copy a rectangular region, keeping metadata and recording the offset."""
    if cols <= 0 or rows <= 0:
        raise DataError("ROI must have positive size")
    if col0 < 0 or row0 < 0 or col0 + cols > img.width_px or row0 + rows > img.height_px:
        raise DataError(
            f"ROI ({col0},{row0},{cols},{rows}) outside "
            f"{img.width_px}x{img.height_px} image"
        )
    sub = img.pixels[row0:row0 + rows, col0:col0 + cols].copy()
    offset = PixelCoord(img.roi_offset.col + col0, img.roi_offset.row + row0)
    return replace(img, pixels=sub, roi_offset=offset)


# ---------------------------------------------------------------------------
# File I/O: binary P5 portable graymap (maxval 255 or 65535) and grayscale PNG.


def _read_pnm_header(f):
    """Parse the P5 header tokens, skipping whitespace and # comments."""
    magic = f.read(2)
    if magic != b"P5":
        raise DataError(f"not a binary portable graymap (magic {magic!r})")
    tokens = []
    while len(tokens) < 3:
        ch = f.read(1)
        if not ch:
            raise DataError("truncated graymap header")
        if ch.isspace():
            continue
        if ch == b"#":
            while ch not in (b"\n", b""):
                ch = f.read(1)
            continue
        tok = ch
        while True:
            ch = f.read(1)
            if not ch or ch.isspace():
                break
            tok += ch
        tokens.append(tok)
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise DataError(f"bad graymap header tokens {tokens}") from exc
    return width, height, maxval


def _load_pgm(path: str) -> np.ndarray:
    with open(path, "rb") as f:
        width, height, maxval = _read_pnm_header(f)
        if width <= 0 or height <= 0:
            raise DataError("zero-sized image")
        if maxval == 255:
            dtype = np.dtype(">u1")
        elif maxval == 65535:
            dtype = np.dtype(">u2")
        else:
            raise DataError(f"unsupported graymap maxval {maxval}")
        raw = f.read(width * height * dtype.itemsize)
        if len(raw) != width * height * dtype.itemsize:
            raise DataError("truncated graymap payload")
    grid = np.frombuffer(raw, dtype=dtype).reshape(height, width)
    return grid.astype(np.float64) / maxval


def _load_png(path: str) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        if im.mode == "L":
            maxval = 255
        elif im.mode in ("I;16", "I;16B", "I"):
            maxval = 65535
        else:
            raise DataError(f"unsupported PNG mode {im.mode!r} (grayscale only)")
        arr = np.asarray(im, dtype=np.float64)
    if arr.size == 0:
        raise DataError("zero-sized image")
    return arr / maxval


def load_gray(path: str, pixel_pitch_mm: float = DEFAULT_PITCH_MM,
              time_us: float = 0.0, exposure_us: float = 0.0) -> GrayImage:
    """Load an 8/16-bit grayscale raster, normalized by its bit-depth maximum."""
    if not os.path.exists(path):
        raise DataError(f"no such file: {path}")
    if path.lower().endswith(".png"):
        grid = _load_png(path)
    else:
        grid = _load_pgm(path)
    return GrayImage(grid, pixel_pitch_mm=pixel_pitch_mm,
                     time_us=time_us, exposure_us=exposure_us)


def save_gray(img: GrayImage, path: str) -> None:
    """Write a 16-bit binary P5 graymap (round(i * 65535))."""
    quant = np.round(img.pixels * 65535).astype(">u2")
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n65535\n" % (img.width_px, img.height_px))
        f.write(quant.tobytes())


def save_mask(bin_img: BinaryImage, path: str) -> None:
    """Write an 8-bit binary P5 graymap with foreground=255, background=0."""
    quant = np.where(bin_img.foreground, 255, 0).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (bin_img.width_px, bin_img.height_px))
        f.write(quant.tobytes())


# ---------------------------------------------------------------------------
# Per-frame metadata sidecar: key=value text with time_us, exposure_us, pitch.


def sidecar_path(image_path: str) -> str:
    return image_path + ".meta"


def save_sidecar(img: GrayImage, image_path: str) -> None:
    with open(sidecar_path(image_path), "w") as f:
        f.write(f"time_us={img.time_us!r}\n")
        f.write(f"exposure_us={img.exposure_us!r}\n")
        f.write(f"pixel_pitch_mm={img.pixel_pitch_mm!r}\n")


def load_sidecar(image_path: str) -> dict:
    meta = {}
    with open(sidecar_path(image_path)) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise DataError(f"malformed sidecar line: {line!r}")
            key, value = line.split("=", 1)
            try:
                meta[key.strip()] = float(value)
            except ValueError as exc:
                raise DataError(f"non-numeric sidecar value: {line!r}") from exc
    return meta


def load_gray_with_sidecar(image_path: str) -> GrayImage:
    """Load a frame plus its .meta sidecar; sidecar values win over defaults."""
    meta = load_sidecar(image_path)
    return load_gray(
        image_path,
        pixel_pitch_mm=meta.get("pixel_pitch_mm", DEFAULT_PITCH_MM),
        time_us=meta.get("time_us", 0.0),
        exposure_us=meta.get("exposure_us", 0.0),
    )
