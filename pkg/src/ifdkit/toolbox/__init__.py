"""The forensic tool registry.

Importing this package registers all fourteen tools (twelve low-level
analyzers plus crop and enhance) in catalog order.
"""

from . import frequency, noise, edges, artifacts, statistics, basic  # noqa: F401  (registration order)
from .artifacts import jpeg_ghost, median_trace
from .basic import crop, enhance
from .edges import highpass_filter, sobel_edges
from .frequency import dct_highpass, dwt_subbands, fft_residual, resampling_periodicity
from .noise import bayar_conv, prnu_inconsistency, srm_residual
from .registry import BY_NAME, REGISTRY, ToolSpec, run_tool
from .report import T_BASIC, T_LOW, Artifact, HeatMap, ToolName, ToolReport
from .statistics import local_correlation

STAT_KEYS = {
    ToolName.FFT_RESIDUAL: ("mean_residual", "p99_residual"),
    ToolName.DWT_SUBBANDS: ("energy_LH", "energy_HL", "energy_HH"),
    ToolName.RESAMPLING_PERIODICITY: ("peak_count", "max_peak_ratio"),
    ToolName.DCT_HIGHPASS: ("mean_hp_energy", "blockiness"),
    ToolName.SRM: ("mean_abs", "p99_abs"),
    ToolName.BAYAR_CONV: ("mean_abs", "variance"),
    ToolName.PRNU: ("mean_corr", "min_corr", "n_outlier_blocks"),
    ToolName.SOBEL: ("mean_mag", "p99_mag"),
    ToolName.HIGHPASS: ("mean_abs", "p99_abs"),
    ToolName.JPEG_GHOST: ("ghost_fraction", "mode_quality"),
    ToolName.MEDIAN_TRACE: ("rho_global", "max_block_rho"),
    ToolName.LOCAL_CORRELATION: ("mean_corr", "p99_corr"),
    ToolName.CROP: ("width", "height"),
    ToolName.ENHANCE: ("mean_before", "mean_after"),
}

__all__ = [
    "Artifact", "BY_NAME", "HeatMap", "REGISTRY", "STAT_KEYS", "T_BASIC", "T_LOW", "ToolName", "ToolReport",
    "ToolSpec", "bayar_conv", "crop", "dct_highpass", "dwt_subbands", "enhance", "fft_residual",
    "highpass_filter", "jpeg_ghost", "local_correlation", "median_trace", "prnu_inconsistency",
    "resampling_periodicity", "run_tool", "sobel_edges", "srm_residual",
]
