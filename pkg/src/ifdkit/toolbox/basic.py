"""Basic image processing exposed as tools (crop, enhance)."""

from __future__ import annotations

from .. import raster as rc
from ..errors import ParameterError
from ..raster import Raster, Region
from .registry import tool
from .report import Artifact, ToolName, ToolReport


@tool(ToolName.CROP, "crop", "crop a region of interest (clamped to bounds)")
def crop(img: Raster, x: int, y: int, w: int, h: int) -> ToolReport:
    for name, v in (("x", x), ("y", y), ("w", w), ("h", h)):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ParameterError(f"crop {name} must be an integer, got {v!r}")
    region = Region(x, y, w, h)
    clamped = region.clamp(img.width, img.height)
    out = rc.crop(img, region)
    return ToolReport(
        ToolName.CROP,
        {"x": x, "y": y, "w": w, "h": h},
        {"width": float(out.width), "height": float(out.height)},
        (Artifact("crop", out),),
        f"Cropped region x={clamped.x}, y={clamped.y}, {clamped.w}x{clamped.h} px from a "
        f"{img.width}x{img.height} image.",
    )


@tool(ToolName.ENHANCE, "enhance", "contrast stretch (2/98 percentiles) or gamma")
def enhance(img: Raster, mode: str = "contrast_stretch", param: float = 1.0) -> ToolReport:
    out = rc.enhance(img, mode, param)
    return ToolReport(
        ToolName.ENHANCE,
        {"mode": mode, "param": float(param)},
        {"mean_before": float(img.data.mean()), "mean_after": float(out.data.mean())},
        (Artifact("enhanced", out),),
        f"Enhanced with {mode}" + (f" (gamma {float(param):g})" if mode == "gamma" else "") + ".",
    )
