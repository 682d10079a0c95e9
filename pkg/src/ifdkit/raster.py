"""Decoded image grids and the pixel-space primitives every tool builds on.

Samples are float64 in [0, 1], stored as an (H, W, C) array with C in {1, 3}.
Arrays are made read-only on construction so a Raster can be shared freely
between threads and sessions.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Literal

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError, EmptyRegionError, ParameterError

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True, eq=False)
class Raster:
    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ParameterError(f"raster must be HxW, HxWx1 or HxWx3, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ParameterError("raster must have at least one pixel")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("raster samples must be finite")
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ParameterError("raster samples must lie in [0, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def plane(self) -> np.ndarray:
        """2-D view of a single-channel raster."""
        if self.channels != 1:
            raise ParameterError("plane is only defined for single-channel rasters")
        return self.data[:, :, 0]

    @classmethod
    def from_uint8(cls, arr) -> Raster:
        return cls(np.asarray(arr, dtype=np.float64) / 255.0)

    def to_uint8(self) -> np.ndarray:
        out = np.round(self.data * 255.0).astype(np.uint8)
        return out[:, :, 0] if self.channels == 1 else out

    def __eq__(self, other):
        if not isinstance(other, Raster):
            return NotImplemented
        return self.data.shape == other.data.shape and bool(np.array_equal(self.data, other.data))

    def __hash__(self):
        return hash((self.data.shape, self.data.tobytes()))

    def __repr__(self):
        return f"Raster({self.width}x{self.height}x{self.channels})"


@dataclass(frozen=True)
class Region:
    x: int
    y: int
    w: int
    h: int

    def clamp(self, width: int, height: int) -> Region:
        x0, y0 = max(self.x, 0), max(self.y, 0)
        x1, y1 = min(self.x + self.w, width), min(self.y + self.h, height)
        if x1 <= x0 or y1 <= y0:
            raise EmptyRegionError(
                f"empty region: ({self.x},{self.y},{self.w},{self.h}) does not intersect a {width}x{height} image"
            )
        return Region(x0, y0, x1 - x0, y1 - y0)


def decode_image(data: bytes) -> Raster:
    """Decode a PNG or baseline JPEG stream.

    Grayscale files yield one channel; palette and alpha images are flattened
    to RGB. 16-bit grayscale PNGs are scaled by 65535.
    """
    try:
        with Image.open(io.BytesIO(data)) as im:
            if im.format not in ("PNG", "JPEG"):
                raise DecodeError(f"unsupported format {im.format!r}")
            im.load()
            if im.mode in ("I;16", "I;16B", "I;16L", "I"):
                arr = np.asarray(im, dtype=np.float64)
                scale = 65535.0 if im.mode.startswith("I;16") or arr.max() > 255 else 255.0
                return Raster(np.clip(arr / scale, 0.0, 1.0))
            if im.mode == "1":
                im = im.convert("L")
            if im.mode != "L":
                im = im.convert("RGB")
            return Raster.from_uint8(np.asarray(im))
    except DecodeError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise DecodeError(f"cannot decode image: {exc}") from exc


def read_image(path) -> Raster:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise DecodeError(f"cannot read {path}: {exc}") from exc
    return decode_image(data)


def _pil_image(img: Raster) -> Image.Image:
    arr = img.to_uint8()
    return Image.fromarray(arr, mode="L" if img.channels == 1 else "RGB")


def encode_jpeg(img: Raster, quality: int) -> bytes:
    """Baseline JPEG via libjpeg (Annex K tables, libjpeg quality scaling, 4:2:0 for RGB)."""
    if isinstance(quality, bool) or not isinstance(quality, (int, np.integer)) or not 1 <= quality <= 100:
        raise ParameterError(f"JPEG quality must be an integer in [1, 100], got {quality!r}")
    buf = io.BytesIO()
    kwargs = {"quality": int(quality), "optimize": False, "progressive": False}
    if img.channels == 3:
        kwargs["subsampling"] = 2
    _pil_image(img).save(buf, format="JPEG", **kwargs)
    return buf.getvalue()


def encode_png(img: Raster) -> bytes:
    buf = io.BytesIO()
    _pil_image(img).save(buf, format="PNG")
    return buf.getvalue()


def jpeg_roundtrip(img: Raster, quality: int) -> Raster:
    return decode_image(encode_jpeg(img, quality))


def to_luma(img: Raster) -> Raster:
    if img.channels == 1:
        return img
    r, g, b = (img.data[:, :, i] for i in range(3))
    y = LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b
    return Raster(np.clip(y, 0.0, 1.0))


def luma_plane(img: Raster) -> np.ndarray:
    return to_luma(img).plane


def crop(img: Raster, region: Region) -> Raster:
    r = region.clamp(img.width, img.height)
    return Raster(img.data[r.y:r.y + r.h, r.x:r.x + r.w, :])


EnhanceMode = Literal["contrast_stretch", "gamma"]


def enhance(img: Raster, mode: str = "contrast_stretch", param: float = 1.0) -> Raster:
    if mode == "contrast_stretch":
        lo, hi = np.percentile(img.data, [2.0, 98.0])
        if hi <= lo:
            return img
        return Raster(np.clip((img.data - lo) / (hi - lo), 0.0, 1.0))
    if mode == "gamma":
        param = float(param)
        if not 0.0 < param <= 10.0:
            raise ParameterError(f"gamma must lie in (0, 10], got {param}")
        if param == 1.0:
            return img
        return Raster(np.clip(np.power(img.data, param), 0.0, 1.0))
    raise ParameterError(f"unknown enhancement mode {mode!r}")
