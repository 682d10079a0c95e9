"""Deterministic synthetic fixtures for tool checks and demos.

Every generator takes an integer seed and returns 8-bit-exact rasters, so
results are reproducible across machines.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .raster import Raster, jpeg_roundtrip


@dataclass(frozen=True)
class SpliceFixture:
    image: Raster
    mask: np.ndarray  # True inside the pasted patch
    host_quality: int | None
    patch_quality: int | None


def quantize(plane: np.ndarray) -> np.ndarray:
    return np.round(np.clip(plane, 0.0, 1.0) * 255.0) / 255.0


def smooth_texture(rng: np.random.Generator, size: int) -> np.ndarray:
    """Natural-looking content: blurred noise at three scales, range ~[0.15, 0.85]."""
    field = sum(w * ndimage.gaussian_filter(rng.standard_normal((size, size)), s, mode="wrap")
                for s, w in ((16.0, 1.0), (4.0, 0.35), (1.5, 0.1)))
    field = (field - field.min()) / (field.max() - field.min())
    return 0.15 + 0.7 * field


def noise_texture(seed: int, size: int = 256) -> Raster:
    """I.i.d. uniform noise, 8-bit quantized."""
    return Raster(quantize(np.random.default_rng(seed).random((size, size))))


def upscale(img: Raster, factor: float = 1.5) -> Raster:
    """Bilinear upscaling, cropped back to the input size."""
    plane = img.plane
    up = ndimage.zoom(plane, factor, order=1, mode="nearest", grid_mode=False)
    return Raster(quantize(up[: plane.shape[0], : plane.shape[1]]))


def patch_mask(size: int, y: int, x: int, patch: int) -> np.ndarray:
    mask = np.zeros((size, size), dtype=bool)
    mask[y:y + patch, x:x + patch] = True
    return mask


def splice_fixture(seed: int, size: int = 512, patch: int = 128, host_noise: float = 1.0 / 255,
                   patch_noise: float = 10.0 / 255, host_quality: int | None = 95,
                   patch_quality: int | None = 85) -> SpliceFixture:
    """Host and patch share content statistics but differ in noise level and JPEG history.

    The patch corner is aligned to the 16-px grid; the composite itself is kept
    lossless so both compression histories survive.
    """
    rng = np.random.default_rng(seed)
    content = smooth_texture(rng, size)
    host = Raster(quantize(content + host_noise * rng.standard_normal((size, size))))
    donor = Raster(quantize(content + patch_noise * rng.standard_normal((size, size))))
    if host_quality is not None:
        host = jpeg_roundtrip(host, host_quality)
    if patch_quality is not None:
        donor = jpeg_roundtrip(donor, patch_quality)
    cells = (size - patch) // 16
    y, x = (int(v) * 16 for v in rng.integers(1, cells, size=2))
    mask = patch_mask(size, y, x, patch)
    data = np.where(mask, donor.plane, host.plane)
    return SpliceFixture(Raster(data), mask, host_quality, patch_quality)


def ghost_fixture(seed: int = 0, size: int = 512, patch: int = 192, host_quality: int = 90,
                  patch_quality: int = 60) -> SpliceFixture:
    """Image last saved at ``host_quality`` with a centered patch pre-compressed at ``patch_quality``."""
    rng = np.random.default_rng(seed)
    content = Raster(quantize(smooth_texture(rng, size) + 2.0 / 255 * rng.standard_normal((size, size))))
    host = jpeg_roundtrip(content, host_quality)
    donor = jpeg_roundtrip(content, patch_quality)
    start = (size - patch) // 2 // 16 * 16
    mask = patch_mask(size, start, start, patch)
    return SpliceFixture(Raster(np.where(mask, donor.plane, host.plane)), mask, host_quality, patch_quality)


def sensor_noise_image(seed: int, size: int = 512, swap_block: tuple[int, int] | None = None,
                       block: int = 64, strength: float = 0.02) -> Raster:
    """Smooth content plus a spatially correlated sensor pattern.

    With ``swap_block=(y, x)`` the pattern inside that block is replaced by
    independent white noise of the same variance, mimicking a foreign splice.
    """
    rng = np.random.default_rng(seed)
    content = ndimage.gaussian_filter(rng.random((size, size)), 8.0)
    content = 0.2 + 0.6 * (content - content.min()) / (content.max() - content.min())
    pattern = ndimage.gaussian_filter(rng.standard_normal((size, size)), 1.0)
    pattern /= pattern.std()
    if swap_block is not None:
        y, x = swap_block
        pattern[y:y + block, x:x + block] = rng.standard_normal((block, block))
    return Raster(np.clip(content + strength * pattern, 0.0, 1.0))


def two_noise_halves(seed: int, size: int = 128, sigma_left: float = 2.0 / 255,
                     sigma_right: float = 8.0 / 255) -> Raster:
    rng = np.random.default_rng(seed)
    plane = np.full((size, size), 0.5)
    plane[:, : size // 2] += sigma_left * rng.standard_normal((size, size // 2))
    plane[:, size // 2:] += sigma_right * rng.standard_normal((size, size - size // 2))
    return Raster(quantize(plane))
