"""Noise-residual analyzers: SRM filter bank, Bayar constrained kernel and the
single-image PRNU consistency check."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..errors import ParameterError
from ..raster import Raster, luma_plane
from ._common import filter2d, offset_free_luma
from .registry import check_positive_int, tool
from .report import Artifact, HeatMap, ToolName, ToolReport, fmt, percentile99

# Fixed SRM kernels, applied to 8-bit scaled luma.
SRM_SECOND_ORDER = np.array([
    [0, 0, 0, 0, 0],
    [0, -1, 2, -1, 0],
    [0, 2, -4, 2, 0],
    [0, -1, 2, -1, 0],
    [0, 0, 0, 0, 0],
], dtype=np.float64) / 4.0
SRM_SQUARE5 = np.array([
    [-1, 2, -2, 2, -1],
    [2, -6, 8, -6, 2],
    [-2, 8, -12, 8, -2],
    [2, -6, 8, -6, 2],
    [-1, 2, -2, 2, -1],
], dtype=np.float64) / 12.0
SRM_SECOND_DIFF = np.array([
    [0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0],
    [0, 1, -2, 1, 0],
    [0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0],
], dtype=np.float64) / 2.0
SRM_KERNELS = (SRM_SECOND_ORDER, SRM_SQUARE5, SRM_SECOND_DIFF)

BAYAR_KERNEL = np.full((5, 5), 1.0 / 24.0)
BAYAR_KERNEL[2, 2] = -1.0


@tool(ToolName.SRM, "srm_residual", "SRM high-pass residual bank (3 fixed kernels, truncated)")
def srm_residual(img: Raster, truncation: float = 3.0) -> ToolReport:
    truncation = float(truncation)
    if truncation <= 0.0:
        raise ParameterError(f"truncation must be positive, got {truncation}")
    x = offset_free_luma(img) * 255.0
    responses = [np.clip(filter2d(x, k), -truncation, truncation) for k in SRM_KERNELS]
    hm = np.max(np.abs(np.stack(responses)), axis=0)
    stats = {"mean_abs": float(hm.mean()), "p99_abs": percentile99(hm)}
    return ToolReport(
        ToolName.SRM,
        {"truncation": truncation},
        stats,
        (Artifact("residual", HeatMap(hm, f"max |SRM residual| over 3 kernels, 8-bit units, truncated at {truncation:g}")),),
        f"SRM noise residual: mean |r| {fmt(stats['mean_abs'])}, p99 {fmt(stats['p99_abs'])} "
        f"(truncation {truncation:g}). Regions with a different noise level stand out.",
    )


@tool(ToolName.BAYAR_CONV, "bayar_conv", "Bayar constrained 5x5 convolution")
def bayar_conv(img: Raster) -> ToolReport:
    response = filter2d(offset_free_luma(img), BAYAR_KERNEL)
    mag = np.abs(response)
    stats = {"mean_abs": float(mag.mean()), "variance": float(response.var())}
    return ToolReport(
        ToolName.BAYAR_CONV,
        {},
        stats,
        (Artifact("response", HeatMap(mag, "|constrained-kernel response|, luma units")),),
        f"Bayar constrained filter: mean |response| {fmt(stats['mean_abs'])}, "
        f"variance {fmt(stats['variance'])}.",
    )


def _ncc(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    denom = np.sqrt(np.sum(a * a) * np.sum(b * b))
    return float(np.sum(a * b) / denom) if denom > 0 else 0.0


@tool(ToolName.PRNU, "prnu_inconsistency", "single-image PRNU block-correlation consistency")
def prnu_inconsistency(img: Raster, block: int = 64, stride: int = 32, denoise_sigma: float = 1.0,
                       outlier_sigma: float = 3.0) -> ToolReport:
    """Blockwise correlation between the noise residual and its 5x5-median-filtered self.

    No camera reference is available, so the residual of the whole image serves
    as its own pattern: a spliced block carries noise with a different spatial
    structure and its correlation drops below the rest.
    """
    block = check_positive_int("block", block, 2)
    stride = check_positive_int("stride", stride)
    denoise_sigma = float(denoise_sigma)
    outlier_sigma = float(outlier_sigma)
    if denoise_sigma <= 0:
        raise ParameterError("denoise_sigma must be positive")
    if outlier_sigma <= 0:
        raise ParameterError("outlier_sigma must be positive")
    plane = luma_plane(img)
    h, w = plane.shape
    if block > min(h, w):
        raise ParameterError(f"block {block} exceeds the smaller image side {min(h, w)}")
    resid = plane - ndimage.gaussian_filter(plane, denoise_sigma, mode="reflect")
    smoothed = ndimage.median_filter(resid, size=5, mode="reflect")
    ys = range(0, h - block + 1, stride)
    xs = range(0, w - block + 1, stride)
    corr = np.array([[_ncc(resid[y:y + block, x:x + block], smoothed[y:y + block, x:x + block])
                      for x in xs] for y in ys])
    mean, sd = float(corr.mean()), float(corr.std())
    outliers = int(np.sum(corr < mean - outlier_sigma * sd)) if sd > 0 else 0
    stats = {"mean_corr": mean, "min_corr": float(corr.min()), "n_outlier_blocks": float(outliers)}
    hm = HeatMap(np.clip(corr, 0.0, None),
                 f"per-block residual correlation (negatives shown as 0), block {block}, stride {stride}",
                 block=stride)
    return ToolReport(
        ToolName.PRNU,
        {"block": block, "stride": stride, "denoise_sigma": denoise_sigma, "outlier_sigma": outlier_sigma},
        stats,
        (Artifact("correlation", hm),),
        f"PRNU consistency over {corr.size} blocks: mean corr {fmt(mean)}, min {fmt(stats['min_corr'])}, "
        f"{outliers} block(s) below mean - {outlier_sigma:g} sd.",
    )
