from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from ..raster import Raster


class ToolName(str, enum.Enum):
    FFT_RESIDUAL = "FFTResidual"
    DWT_SUBBANDS = "DWTSubbands"
    RESAMPLING_PERIODICITY = "ResamplingPeriodicity"
    DCT_HIGHPASS = "DCTHighPass"
    SRM = "SRM"
    BAYAR_CONV = "BayarConv"
    PRNU = "PRNU"
    SOBEL = "Sobel"
    HIGHPASS = "HighPass"
    JPEG_GHOST = "JPEGGhost"
    MEDIAN_TRACE = "MedianTrace"
    LOCAL_CORRELATION = "LocalCorrelation"
    CROP = "Crop"
    ENHANCE = "Enhance"

    def __str__(self):
        return self.value


T_BASIC = frozenset({ToolName.CROP, ToolName.ENHANCE})
T_LOW = frozenset(set(ToolName) - T_BASIC)


@dataclass(frozen=True, eq=False)
class HeatMap:
    """Non-negative analysis map.

    ``block`` is the cell size for blockwise maps (1 for per-pixel maps).
    ``domain`` is "frequency" for spectra, whose dims follow the transform size.
    """

    values: np.ndarray
    scale_note: str = ""
    block: int = 1
    domain: str = "spatial"

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError("heatmap values must be 2-D")
        if not np.all(np.isfinite(v)) or (v.size and v.min() < 0.0):
            raise ValueError("heatmap values must be finite and non-negative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def normalized(self) -> tuple[np.ndarray, float, float]:
        """Min-max normalize to [0, 1]; a flat map normalizes to zeros."""
        lo, hi = float(self.values.min()), float(self.values.max())
        if hi > lo:
            return (self.values - lo) / (hi - lo), lo, hi
        return np.zeros_like(self.values), lo, hi

    def to_raster(self) -> Raster:
        return Raster(self.normalized()[0])

    def __eq__(self, other):
        if not isinstance(other, HeatMap):
            return NotImplemented
        return (
            self.scale_note == other.scale_note
            and self.block == other.block
            and self.domain == other.domain
            and self.values.shape == other.values.shape
            and bool(np.array_equal(self.values, other.values))
        )


ArtifactData = Union[HeatMap, Raster]


@dataclass(frozen=True)
class Artifact:
    """One output of a tool. ``name`` is tool-local; ids are assigned by the session."""

    name: str
    data: ArtifactData

    @property
    def kind(self) -> str:
        return "heatmap" if isinstance(self.data, HeatMap) else "raster"


@dataclass(frozen=True)
class ToolReport:
    tool: ToolName
    params: dict
    stats: dict[str, float] = field(default_factory=dict)
    artifacts: tuple[Artifact, ...] = ()
    summary_text: str = ""
    status: str = "ok"
    reason: str | None = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @classmethod
    def failed(cls, tool: ToolName, params: dict, reason: str) -> ToolReport:
        return cls(tool=tool, params=dict(params), summary_text=f"{tool.value} failed: {reason}",
                   status="failed", reason=reason)

    def primary(self) -> Artifact | None:
        return self.artifacts[0] if self.artifacts else None


def fmt(value: float) -> str:
    """Render a stat with 6 significant digits (the observation text contract)."""
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    return f"{value:.6g}"


def percentile99(values: np.ndarray) -> float:
    return float(np.percentile(values, 99.0))
