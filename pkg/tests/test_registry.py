from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from ifdkit.errors import ParameterError
from ifdkit.synth import noise_texture
from ifdkit.toolbox import BY_NAME, REGISTRY, STAT_KEYS, T_BASIC, T_LOW, ToolName, run_tool

CALL_NAMES = [
    "fft_residual", "dwt_subbands", "resampling_periodicity", "dct_highpass", "srm_residual", "bayar_conv",
    "prnu_inconsistency", "sobel_edges", "highpass_filter", "jpeg_ghost", "median_trace", "local_correlation",
    "crop", "enhance",
]
CROP_ARGS = {"x": 0, "y": 0, "w": 64, "h": 64}
IMG = noise_texture(5, 128)


def default_args(call_name: str) -> dict:
    return dict(CROP_ARGS) if call_name == "crop" else {}


def test_fourteen_tools_in_order():
    assert list(REGISTRY) == CALL_NAMES
    assert [s.name for s in REGISTRY.values()] == list(ToolName)


def test_partition():
    assert len(T_LOW) == 12 and T_BASIC == {ToolName.CROP, ToolName.ENHANCE}
    assert T_LOW | T_BASIC == set(ToolName) and not T_LOW & T_BASIC


def test_signatures_render():
    assert BY_NAME[ToolName.CROP].signature() == "crop(image, x, y, w, h)"
    assert BY_NAME[ToolName.SRM].signature() == "srm_residual(image, truncation=3.0)"


@pytest.mark.parametrize("call_name", CALL_NAMES)
def test_stats_complete_and_finite(call_name):
    rep = run_tool(call_name, IMG, **default_args(call_name))
    assert rep.ok, rep.reason
    assert tuple(rep.stats) == STAT_KEYS[rep.tool]
    assert all(np.isfinite(v) for v in rep.stats.values())
    assert rep.artifacts and rep.summary_text


@pytest.mark.parametrize("call_name", CALL_NAMES)
def test_unknown_parameter_fails_without_artifacts(call_name):
    rep = run_tool(call_name, IMG, bogus=1, **default_args(call_name))
    assert rep.status == "failed" and rep.artifacts == () and "bogus" in rep.reason


def test_missing_parameter():
    rep = run_tool("crop", IMG, x=0)
    assert rep.status == "failed" and "missing" in rep.reason


def test_unknown_tool():
    with pytest.raises(ParameterError, match="valid"):
        run_tool("sharpen", IMG)


def test_deterministic_across_threads():
    def signature(call_name):
        rep = run_tool(call_name, IMG, **default_args(call_name))
        return rep.stats, [a.data for a in rep.artifacts]

    serial = [signature(c) for c in CALL_NAMES]
    with ThreadPoolExecutor(8) as pool:
        parallel = list(pool.map(signature, CALL_NAMES * 2))
    for i, (stats, arts) in enumerate(parallel):
        ref_stats, ref_arts = serial[i % len(CALL_NAMES)]
        assert stats == ref_stats and arts == ref_arts
