from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..errors import ParameterError
from ..raster import Raster
from ._common import offset_free_luma
from .registry import tool
from .report import Artifact, HeatMap, ToolName, ToolReport, fmt, percentile99

# Window variances below this are treated as exactly zero (8-bit data never gets close).
_ZERO_VAR = 1e-12


def local_shift_correlation(plane: np.ndarray, window: int) -> np.ndarray:
    """Windowed Pearson correlation between each pixel and its right neighbour.

    Computed on windows fully inside the image, then edge-extended back to the
    full size. Zero-variance windows map to 0.
    """
    a, b = plane[:, :-1], plane[:, 1:]
    h, w = a.shape
    half = window // 2

    def box(x):
        return ndimage.uniform_filter(x, size=window, mode="reflect")

    ma, mb = box(a), box(b)
    va = box(a * a) - ma * ma
    vb = box(b * b) - mb * mb
    cov = box(a * b) - ma * mb
    valid = (slice(half, h - half), slice(half, w - half))
    va, vb, cov = va[valid], vb[valid], cov[valid]
    ok = (va > _ZERO_VAR) & (vb > _ZERO_VAR)
    corr = np.zeros_like(cov)
    corr[ok] = cov[ok] / np.sqrt(va[ok] * vb[ok])
    corr = np.clip(corr, -1.0, 1.0)
    full_h, full_w = plane.shape
    pad = ((half, full_h - h + half), (half, full_w - w + half))
    return np.pad(corr, pad, mode="edge")


@tool(ToolName.LOCAL_CORRELATION, "local_correlation", "windowed neighbour correlation map")
def local_correlation(img: Raster, window: int = 7) -> ToolReport:
    if isinstance(window, bool) or int(window) != window or window < 3 or window % 2 == 0:
        raise ParameterError(f"window must be an odd integer >= 3, got {window!r}")
    window = int(window)
    plane = offset_free_luma(img)
    if plane.shape[0] < window or plane.shape[1] < window + 1:
        raise ParameterError(f"image too small for a {window}x{window} correlation window")
    corr = np.clip(local_shift_correlation(plane, window), 0.0, 1.0)
    stats = {"mean_corr": float(corr.mean()), "p99_corr": percentile99(corr)}
    return ToolReport(
        ToolName.LOCAL_CORRELATION,
        {"window": window},
        stats,
        (Artifact("correlation", HeatMap(corr, "neighbour correlation clipped to [0, 1]")),),
        f"Local correlation ({window}x{window}): mean {fmt(stats['mean_corr'])}, p99 {fmt(stats['p99_corr'])}.",
    )
