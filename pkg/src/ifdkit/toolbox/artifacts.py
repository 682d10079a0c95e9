"""Manipulation-specific traces: JPEG ghosts and median-filter streaking."""

from __future__ import annotations

import numpy as np

from ..errors import ParameterError
from ..raster import Raster, jpeg_roundtrip, luma_plane
from ._common import block_means
from .registry import check_positive_int, tool
from .report import Artifact, HeatMap, ToolName, ToolReport, fmt


def quality_grid(q_min: int, q_max: int, q_step: int) -> list[int]:
    q_min = check_positive_int("q_min", q_min)
    q_max = check_positive_int("q_max", q_max)
    q_step = check_positive_int("q_step", q_step)
    if q_max > 100:
        raise ParameterError(f"q_max must be <= 100, got {q_max}")
    if q_min > q_max:
        raise ParameterError(f"q_min ({q_min}) must not exceed q_max ({q_max})")
    return list(range(q_min, q_max + 1, q_step))


def ghost_curves(plane: np.ndarray, grid: list[int], block: int) -> np.ndarray:
    """Blockwise mean squared recompression error, shape (len(grid), cells_y, cells_x)."""
    ref = Raster(plane)
    return np.stack([
        block_means((jpeg_roundtrip(ref, q).plane - plane) ** 2, block) for q in grid
    ])


@tool(ToolName.JPEG_GHOST, "jpeg_ghost", "JPEG ghost: blockwise recompression error across qualities")
def jpeg_ghost(img: Raster, q_min: int = 50, q_max: int = 95, q_step: int = 5, block: int = 16,
               dip_threshold: float = 0.2) -> ToolReport:
    """Recompress at every grid quality and locate each cell's error minimum.

    Cells whose minimum sits at a quality other than the image-wide mode, with
    a deep dip (error at the minimum below ``dip_threshold`` times the error at
    the mode quality), count as ghosts. Flat error curves are assigned the mode.
    """
    grid = quality_grid(q_min, q_max, q_step)
    block = check_positive_int("block", block)
    dip_threshold = float(dip_threshold)
    if not 0.0 < dip_threshold <= 1.0:
        raise ParameterError(f"dip_threshold must lie in (0, 1], got {dip_threshold}")
    params = {"q_min": q_min, "q_max": q_max, "q_step": q_step, "block": block, "dip_threshold": dip_threshold}

    curves = ghost_curves(luma_plane(img), grid, block)
    lo, hi = curves.min(axis=0), curves.max(axis=0)
    flat = hi <= lo
    span = np.where(flat, 1.0, hi - lo)
    norm = np.where(flat, 0.0, (curves - lo) / span)
    arg = np.argmin(curves, axis=0)

    if flat.all():
        mode_idx = len(grid) - 1
    else:
        mode_idx = int(np.argmax(np.bincount(arg[~flat], minlength=len(grid))))
    arg = np.where(flat, mode_idx, arg)

    at_mode = curves[mode_idx]
    at_min = np.take_along_axis(curves, arg[None], axis=0)[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        dip = np.where(at_mode > 0, at_min / at_mode, 1.0)
    if len(grid) < 2:
        ghosts = np.zeros_like(flat)
    else:
        ghosts = (arg != mode_idx) & (dip < dip_threshold)
    ghost_fraction = float(ghosts.mean())
    mode_quality = grid[mode_idx]
    argmin_q = np.asarray(grid, dtype=np.float64)[arg]

    artifacts = [
        Artifact("mode_deviation", HeatMap(norm[mode_idx], f"normalized error at mode quality {mode_quality}", block=block)),
        Artifact("argmin_quality", HeatMap(argmin_q, "quality of minimum recompression error per cell", block=block)),
    ]
    artifacts += [
        Artifact(f"diff_q{q}", HeatMap(norm[i], f"min-max normalized error at quality {q}", block=block))
        for i, q in enumerate(grid)
    ]
    stats = {"ghost_fraction": ghost_fraction, "mode_quality": float(mode_quality)}
    ghost_qs = sorted({int(q) for q in argmin_q[ghosts]})
    detail = f" at qualities {ghost_qs}" if ghost_qs else ""
    return ToolReport(
        ToolName.JPEG_GHOST,
        params,
        stats,
        tuple(artifacts),
        f"JPEG ghost over q={grid[0]}..{grid[-1]}: most cells bottom out at q={mode_quality}; "
        f"{ghost_fraction:.1%} of {ghosts.size} cells show a ghost{detail}.",
    )


@tool(ToolName.MEDIAN_TRACE, "median_trace", "median filtering streak statistic")
def median_trace(img: Raster, block: int = 32, threshold: float = 0.40) -> ToolReport:
    block = check_positive_int("block", block)
    threshold = float(threshold)
    q = np.round(luma_plane(img) * 255.0).astype(np.int16)
    if q.shape[1] < 2:
        raise ParameterError("median trace needs an image at least 2 pixels wide")
    zeros = (np.diff(q, axis=1) == 0).astype(np.float64)
    rho = float(zeros.mean())
    cells = block_means(zeros, block)
    stats = {"rho_global": rho, "max_block_rho": float(cells.max())}
    flagged = rho > threshold
    verdict = "suspicious smoothing consistent with median filtering" if flagged else "no median-filtering signature"
    return ToolReport(
        ToolName.MEDIAN_TRACE,
        {"block": block, "threshold": threshold},
        stats,
        (Artifact("zero_diff_rate", HeatMap(cells, "fraction of zero horizontal 8-bit differences per cell", block=block)),),
        f"Median trace: {fmt(rho)} of horizontal differences are zero (threshold {threshold:g}); {verdict}.",
    )
