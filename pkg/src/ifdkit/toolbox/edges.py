from __future__ import annotations

import numpy as np

from ..raster import Raster
from ._common import filter2d, offset_free_luma
from .registry import tool
from .report import Artifact, HeatMap, ToolName, ToolReport, fmt, percentile99

SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
SOBEL_Y = SOBEL_X.T.copy()
LAPLACIAN = np.array([[0, -1, 0], [-1, 4, -1], [0, -1, 0]], dtype=np.float64)


@tool(ToolName.SOBEL, "sobel_edges", "3x3 Sobel gradient magnitude")
def sobel_edges(img: Raster) -> ToolReport:
    x = offset_free_luma(img)
    mag = np.hypot(filter2d(x, SOBEL_X), filter2d(x, SOBEL_Y))
    stats = {"mean_mag": float(mag.mean()), "p99_mag": percentile99(mag)}
    return ToolReport(
        ToolName.SOBEL,
        {},
        stats,
        (Artifact("magnitude", HeatMap(mag, "Sobel gradient magnitude, luma units")),),
        f"Sobel edges: mean magnitude {fmt(stats['mean_mag'])}, p99 {fmt(stats['p99_mag'])}.",
    )


@tool(ToolName.HIGHPASS, "highpass_filter", "3x3 Laplacian high-pass")
def highpass_filter(img: Raster) -> ToolReport:
    mag = np.abs(filter2d(offset_free_luma(img), LAPLACIAN))
    stats = {"mean_abs": float(mag.mean()), "p99_abs": percentile99(mag)}
    return ToolReport(
        ToolName.HIGHPASS,
        {},
        stats,
        (Artifact("response", HeatMap(mag, "|Laplacian response|, luma units")),),
        f"Laplacian high-pass: mean |response| {fmt(stats['mean_abs'])}, p99 {fmt(stats['p99_abs'])}.",
    )
