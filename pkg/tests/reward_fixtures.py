"""Twelve scripted trajectories with hand-derived reward breakdowns (default config).

Each entry spells out the arithmetic so the expected numbers can be checked by
reading: tool = 0.3*g + 0.3*l + 0.2*c + 0.2*coh, total = acc + 0.5*fmt + 0.5*tool.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ifdkit.rewards import GoldLabel
from ifdkit.trajectory import Trajectory

from builders import code, scripted, with_assistant_text

COMPONENTS = ("r_acc", "r_format", "r_global", "r_logic", "r_crop", "r_coh", "r_tool", "r_total")


@dataclass(frozen=True)
class RewardCase:
    name: str
    turns: tuple[str, ...]
    gold: GoldLabel
    expected: dict
    kwargs: dict = field(default_factory=dict)
    edit: tuple[int, str] | None = None  # (assistant turn, replacement text) applied after the run

    def trajectory(self) -> Trajectory:
        traj = scripted(list(self.turns), **self.kwargs)
        if self.edit is not None:
            traj = with_assistant_text(traj, *self.edit)
        return traj


def _exp(acc, fmt, g, l, c, coh, tool, total):
    return dict(zip(COMPONENTS, (acc, fmt, g, l, c, coh, tool, total)))


_F4_TURN1 = code("fft_residual(image_clue_0)", "srm_residual(image_clue_0)")

CASES = (
    # DCT screen, crop, ghost on the crop: every term fires; 0.3+0.3+0.2+0.2 = 1, total 1 + 0.5 + 0.5
    RewardCase("F1_golden", (
        code("dct_highpass(image_clue_0)"),
        code("out1 = crop(image_clue_0, 0, 0, 32, 32)", "jpeg_ghost(out1)"),
        "<answer>tampered: upper left</answer>"), GoldLabel("tampered"),
        _exp(1, 1, 1, 1, 1, 1, 1.0, 2.0)),
    # no calls: every tool term is zero, total 1 + 0.5
    RewardCase("F2_immediate_answer", ("<answer>authentic</answer>",), GoldLabel("authentic"),
               _exp(1, 1, 0, 0, 0, 0, 0.0, 1.5)),
    # crop before any low-level tool: indicator false; crop keyed on authentic = 0.1; 0.3 + 0.02
    RewardCase("F3_basic_first", (
        code("crop(image_clue_0, 0, 0, 32, 32)", "srm_residual(image_clue_0)"),
        "<answer>authentic</answer>"), GoldLabel("authentic"),
        _exp(1, 1, 0, 1, 0.1, 0, 0.32, 1.66)),
    # t_basic absent counts as +inf: g = 1; 0.3 + 0.3
    RewardCase("F4_no_basic_tool", (_F4_TURN1, "<answer>synthetic</answer>"), GoldLabel("synthetic"),
               _exp(1, 1, 1, 1, 0, 0, 0.6, 1.8)),
    # crop keyed on predicted synthetic (0.2) although gold is tampered; 0.3+0.3+0.04+0.2
    RewardCase("F5_wrong_label", (
        code("bayar_conv(image_clue_0)", "c = crop(image_clue_0, 0, 0, 32, 32)", "sobel_edges(c)"),
        "<answer>synthetic</answer>"), GoldLabel("tampered"),
        _exp(0, 1, 1, 1, 0.2, 1, 0.84, 0.92)),
    # budget 2, four calls: 2 executed, 2 rejected -> l = 2/4; forced turn answers
    RewardCase("F6_rejected_calls", (
        code("fft_residual(image_clue_0)", "srm_residual(image_clue_0)", "sobel_edges(image_clue_0)",
             "highpass_filter(image_clue_0)"),
        "<answer>tampered</answer>"), GoldLabel("tampered"),
        _exp(1, 1, 1, 0.5, 0, 0, 0.45, 1.725), kwargs={"budget": 2}),
    # one failed execution and one unparsed line out of four attempts; the parse error kills format
    RewardCase("F7_failures", (
        code("srm_residual(image_clue_0)", "bayar_conv(out9)"),
        code("sobel_edges(image_clue_0, 3)", "highpass_filter(image_clue_0)"),
        "<answer>authentic</answer>"), GoldLabel("authentic"),
        _exp(1, 0, 1, 0.5, 0, 0, 0.45, 1.225)),
    # F4 with an extra answer tag in turn 1: premature answer, format 0, total 1 + 0.3
    RewardCase("F8_premature_answer", (_F4_TURN1, "<answer>synthetic</answer>"), GoldLabel("synthetic"),
               _exp(1, 0, 1, 1, 0, 0, 0.6, 1.3), edit=(1, _F4_TURN1 + "\n<answer>synthetic</answer>")),
    # budget 1 used by a crop; the forced turn replies with code only: no final, l = 1/2, tool 0.15
    RewardCase("F9_forced_no_answer", (
        code("out1 = crop(image_clue_0, 0, 0, 32, 32)"), code("srm_residual(out1)")), GoldLabel("tampered"),
        _exp(0, 0, 0, 0.5, 0, 0, 0.15, 0.075), kwargs={"budget": 1}),
    # crop, crop, SRM on the second crop: coherence pair at t = 2, 3; t_low = 3 > t_basic = 1
    RewardCase("F10_double_crop_chain", (
        code("a = crop(image_clue_0, 0, 0, 48, 48)", "b = crop(a, 0, 0, 32, 32)", "srm_residual(b)"),
        "<answer>tampered</answer>"), GoldLabel("tampered"),
        _exp(1, 1, 0, 1, 1, 1, 0.7, 1.85)),
    # ghost ignores the crop (chain false); wrong verdict; 0.3 + 0.2
    RewardCase("F11_broken_chain", (
        code("out1 = crop(image_clue_0, 0, 0, 32, 32)", "jpeg_ghost(image_clue_0)"),
        "<answer>tampered</answer>"), GoldLabel("authentic"),
        _exp(0, 1, 0, 1, 1, 0, 0.5, 0.75)),
    # invalid token, then an empty forced turn at the turn limit: no final, format 0, total 0.5 * 0.6
    RewardCase("F12_invalid_token", (
        code("fft_residual(image_clue_0)"), "<answer>fake</answer>"), GoldLabel("synthetic"),
        _exp(0, 0, 1, 1, 0, 0, 0.6, 0.3), kwargs={"turn_limit": 3}),
)
