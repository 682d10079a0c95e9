from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ifdkit.protocol import CLASS_LABELS, FinalAnswer, parse_answer, parse_call_line, parse_turn, validate_format
from ifdkit.toolbox import REGISTRY, ToolName

from builders import code, scripted, with_assistant_text

FRAGMENTS = ["<code>", "</code>", "<answer>", "</answer>", "\n", "crop(", "image_clue_0", ", ", ")", "=", "out1",
             "jpeg_ghost", "q_step=", "10", "'x'", '"', "#", "tampered", ":", " ", "srm_residual(", "1.5e3", "<", ">"]


class TestParseTurnExamples:
    def test_bound_call(self):
        p = parse_turn("<code>out1 = srm_residual(image_clue_0)</code>")
        assert p.format_ok and p.answer is None
        (spec,) = p.code_blocks
        assert (spec.tool, spec.input_ref, spec.params, spec.declared_output) == (ToolName.SRM, "image_clue_0", {}, "out1")

    def test_answer_with_object(self):
        p = parse_turn("<answer>tampered: the red car</answer>")
        assert p.answer == FinalAnswer("tampered", "the red car") and p.format_ok

    def test_unclosed_paren(self):
        text = "<code>crop(image_clue_0, 10, 20</code>"
        p = parse_turn(text)
        assert not p.format_ok and not p.code_blocks
        (d,) = p.diagnostics
        # end of the code line, where ')' was expected
        assert d.position == text.index("</code>")
        assert "')'" in d.message

    def test_keywords_positionals_comments(self):
        text = code("a = crop(image_clue_0, 0, 0, w=32, h=32)  # region", "", "# note", "jpeg_ghost( a ,q_step = 10 )")
        p = parse_turn(text)
        assert p.format_ok
        assert [s.params for s in p.code_blocks] == [{"x": 0, "y": 0, "w": 32, "h": 32}, {"q_step": 10}]
        assert p.code_blocks[1].input_ref == "a"

    def test_literals(self):
        spec = parse_call_line("enhance(out2, 'gamma', -1.5e-1)")
        assert spec.params == {"mode": "gamma", "param": -0.15}
        assert parse_call_line('enhance(x, mode="a\\"b")').params == {"mode": 'a"b'}

    @pytest.mark.parametrize("line, fragment", [
        ("sharpen(image_clue_0)", "unknown tool"),
        ("crop(image_clue_0, x=1, 2)", "positional value after keyword"),
        ("crop(image_clue_0, x=1, x=2)", "given twice"),
        ("srm_residual(image_clue_0, foo=1)", "no parameter"),
        ("image_clue_1 = crop(image_clue_0, 0, 0, 1, 1)", "reserved"),
        ("srm_residual(image_clue_0) extra", "after call"),
        ("srm_residual(image_clue_0, truncation=abc)", "number or quoted string"),
        ("srm_residual(image_clue_0, 'abc)", "unterminated"),
        ("srm_residual(image_clue_0, 1, 2)", "at most 1"),
        ("srm_residual(3)", "image reference"),
    ])
    def test_line_errors(self, line, fragment):
        p = parse_turn(f"<code>{line}</code>")
        assert not p.format_ok and len(p.failed_calls) == 1
        assert fragment in p.diagnostics[0].message
        assert 6 <= p.diagnostics[0].position <= 6 + len(line)

    def test_every_registry_name_parses(self):
        for name in REGISTRY:
            assert parse_call_line(f"{name}(image_clue_0)").tool == REGISTRY[name].name

    @pytest.mark.parametrize("text, msg", [
        ("</code>", "unmatched"),
        ("<code>srm_residual(image_clue_0)", "unclosed"),
        ("<code><answer>tampered</answer></code>", "inside"),
        ("<answer>authentic</answer><answer>tampered</answer>", "more than one"),
        ("<answer>fake</answer>", "invalid class token"),
    ])
    def test_tag_errors(self, text, msg):
        p = parse_turn(text)
        assert not p.format_ok and any(msg in d.message for d in p.diagnostics)

    def test_two_answers_yield_no_answer(self):
        assert parse_turn("<answer>authentic</answer><answer>authentic</answer>").answer is None


class TestAnswerGrammar:
    @pytest.mark.parametrize("label", CLASS_LABELS)
    def test_case_insensitive(self, label):
        assert parse_answer(f"  {label.upper()} ") == FinalAnswer(label)

    def test_object_whitespace_trim(self):
        assert parse_answer("Tampered:   the \n red   car ") == FinalAnswer("tampered", "the red car")
        assert parse_answer("synthetic:") == FinalAnswer("synthetic")

    @pytest.mark.parametrize("text", ["fake", "", "tamper", "authentic car"])
    def test_invalid(self, text):
        assert parse_answer(text) is None

    def test_final_answer_label_checked(self):
        with pytest.raises(ValueError):
            FinalAnswer("forged")


class TestTotality:
    @given(st.text(max_size=300))
    def test_arbitrary_text(self, text):
        p = parse_turn(text)
        assert p.format_ok == (not p.diagnostics)
        assert all(0 <= d.position < max(len(text), 1) for d in p.diagnostics)

    @given(st.lists(st.sampled_from(FRAGMENTS), max_size=40).map("".join))
    def test_tag_soup(self, text):
        p = parse_turn(text)
        assert all(0 <= d.position < max(len(text), 1) for d in p.diagnostics)
        assert p.answer_tags <= text.count("<answer>")

    @given(st.sampled_from(sorted(REGISTRY)), st.lists(st.integers(-50, 50), max_size=1))
    def test_accepted_lines_reparse_identically(self, name, values):
        line = f"{name}(image_clue_0{''.join(f', {v}' for v in values)})"
        try:
            spec = parse_call_line(line)
        except Exception:
            return
        assert parse_call_line(spec.source) == spec


class TestValidateFormat:
    def test_valid_fixture(self):
        traj = scripted([code("fft_residual(image_clue_0)"), "<answer>synthetic</answer>"])
        assert validate_format(traj) == (1.0, [])

    def test_invalid_class_token(self):
        traj = scripted([code("fft_residual(image_clue_0)"), "<answer>fake</answer>", "<answer>fake</answer>"],
                        turn_limit=3)
        score, problems = validate_format(traj)
        assert score == 0.0 and any("invalid class token" in p for p in problems)

    def test_premature_answer(self):
        turns = [code("fft_residual(image_clue_0)"), code("srm_residual(image_clue_0)"),
                 code("sobel_edges(image_clue_0)"), "<answer>tampered</answer>"]
        traj = scripted(turns)
        assert traj.T == 4 and validate_format(traj)[0] == 1.0
        bad = with_assistant_text(traj, 2, turns[1] + "\n<answer>tampered</answer>")
        score, problems = validate_format(bad)
        assert score == 0.0 and problems == ["turn 2: answer before the final turn"]

    def test_no_answer(self):
        traj = scripted([code("fft_residual(image_clue_0)")], turn_limit=2)
        assert validate_format(traj)[0] == 0.0
