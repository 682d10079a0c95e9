from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..raster import Raster, luma_plane


def offset_free_luma(img: Raster) -> np.ndarray:
    """Luma minus its first sample.

    Every zero-DC operator is blind to a constant offset, and removing it
    exactly keeps flat images at exactly zero instead of rounding noise.
    """
    plane = luma_plane(img)
    return plane - plane[0, 0]


def filter2d(plane: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Correlation with symmetric (reflect) boundary handling."""
    return ndimage.correlate(plane, np.asarray(kernel, dtype=np.float64), mode="reflect")


def block_means(values: np.ndarray, block: int) -> np.ndarray:
    """Average over block x block cells; ragged edge cells average what they hold."""
    h, w = values.shape
    nby, nbx = -(-h // block), -(-w // block)
    padded = np.zeros((nby * block, nbx * block))
    counts = np.zeros_like(padded)
    padded[:h, :w] = values
    counts[:h, :w] = 1.0
    s = padded.reshape(nby, block, nbx, block).sum(axis=(1, 3))
    c = counts.reshape(nby, block, nbx, block).sum(axis=(1, 3))
    return s / c
