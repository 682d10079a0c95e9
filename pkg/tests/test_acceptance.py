"""Acceptance suite: one test per headline criterion, each with its runtime limit.

Every test prints a single ``PASS``/``FAIL`` line; the lines are repeated in
the terminal summary (see conftest.py).
"""

from __future__ import annotations

import json
import logging
import random
from contextlib import contextmanager
from time import perf_counter

import numpy as np
import pytest
from click.testing import CliRunner

from ifdkit.agent import ScriptedPolicy, SessionConfig, run_session
from ifdkit.cli import main
from ifdkit.evaluation import evaluate, overall_metrics
from ifdkit.grpo import clipped_term, group_advantages, kl_estimate
from ifdkit.protocol import parse_turn
from ifdkit.raster import Raster, encode_png
from ifdkit.rewards import score
from ifdkit.synth import ghost_fixture, noise_texture, splice_fixture, upscale
from ifdkit.toolbox import (bayar_conv, dwt_subbands, fft_residual, highpass_filter, jpeg_ghost,
                            resampling_periodicity, sobel_edges, srm_residual)
from ifdkit.trajectory import load_trajectory, read_trajectory, serialize_trajectory

from builders import EVIDENCE_CHAIN_SCRIPT, code, random_trajectory, ratio_inside_outside, upsample_mask
from reward_fixtures import CASES, COMPONENTS
from test_evaluation import assert_matches_oracle, balanced_manifest
from test_gateway import FIXTURES, SECRET, MockChatServer, MockResponse, run_golden
from test_grpo import CLIP_TABLE
from test_protocol import FRAGMENTS

RESULTS: list[str] = []


@contextmanager
def criterion(name: str, limit_s: float):
    start = perf_counter()
    ok = False
    try:
        yield
        ok = True
    finally:
        elapsed = perf_counter() - start
        status = "PASS" if ok and elapsed < limit_s else "FAIL"
        line = f"{status} {name} ({elapsed:.2f}s, limit {limit_s:g}s)"
        RESULTS.append(line)
        print(line)
    assert elapsed < limit_s, line


def test_benchmark_scale_results():
    line = ("N/A benchmark-scale accuracy: needs the trained multimodal model and the full benchmark, "
            "neither available here; covered by the oracle and property criteria below")
    RESULTS.append(line)
    print(line)
    pytest.skip(line)


def test_reward_exactness():
    with criterion("reward exactness: 12 scripted trajectories to 1e-9", 1.0):
        for case in CASES:
            got = score(case.trajectory(), case.gold).as_dict()
            for key in COMPONENTS:
                assert abs(got[key] - case.expected[key]) <= 1e-9, (case.name, key)
        assert CASES[0].expected["r_total"] == 2.0


def adversarial_script(seed: int) -> list[str]:
    rng = random.Random(seed)
    lines = ["crop(image_clue_0, 0, 0, 16, 16)", "srm_residual(image_clue_0)", "a = crop(image_clue_0, 2, 2, 20, 20)",
             "sobel_edges(a)", "highpass_filter(image_clue_0)", "fft_residual(nothing)", "crop(image_clue_0, 99, 99, 1, 1)"]
    turns = []
    for _ in range(rng.randrange(1, 14)):
        kind = rng.random()
        if kind < 0.8:
            turns.append(code(*(rng.choice(lines) for _ in range(rng.randrange(1, 25)))))
        elif kind < 0.9:
            turns.append(code(*(rng.choice(lines) for _ in range(5))) + "<answer>tampered</answer>")
        else:
            turns.append(rng.choice(["", "<answer>fake</answer>", "<code>", "thinking"]))
    return turns


def test_budget_safety():
    clue = Raster(np.random.default_rng(0).random((32, 32)))
    with criterion("budget safety: 200 adversarial scripted policies, <= 7 executed calls", 10.0):
        for seed in range(200):
            traj = run_session([clue], ScriptedPolicy(adversarial_script(seed)), SessionConfig())
            assert len(traj.calls) <= 7, seed


def test_toolbox_null_and_sensitivity():
    with criterion("toolbox null/sensitivity: zero maps, splice ratios, ghost localization", 60.0):
        const = Raster(np.full((128, 128), 0.42))
        for tool in (fft_residual, srm_residual, bayar_conv, sobel_edges, highpass_filter, dwt_subbands):
            rep = tool(const)
            assert rep.ok and all(not a.data.values.any() for a in rep.artifacts), tool.__name__

        wins = {"SRM": 0, "BayarConv": 0, "JPEGGhost": 0}
        for seed in range(10):
            fx = splice_fixture(seed)
            for name, tool in (("SRM", srm_residual), ("BayarConv", bayar_conv)):
                wins[name] += ratio_inside_outside(tool(fx.image).primary().data.values, fx.mask) >= 1.5
            ghost = jpeg_ghost(fx.image).primary().data
            cells = upsample_mask(fx.mask, ghost.values.shape, ghost.block)
            wins["JPEGGhost"] += ratio_inside_outside(ghost.values, cells) >= 1.5
        assert all(v >= 9 for v in wins.values()), wins

        fx = ghost_fixture()
        argmin = jpeg_ghost(fx.image).artifacts[1].data
        inside = upsample_mask(fx.mask, argmin.values.shape, argmin.block)
        assert np.mean(np.abs(argmin.values[inside] - 60) <= 5) >= 0.7


def test_resampling_detector():
    with criterion("resampling detector: 20 seeds, >= 18 upscaled flagged and >= 18 originals clean", 30.0):
        flagged_up = flagged_orig = 0
        for seed in range(20):
            base = noise_texture(seed, 256)
            flagged_orig += resampling_periodicity(base).stats["peak_count"] >= 2
            flagged_up += resampling_periodicity(upscale(base, 1.5)).stats["peak_count"] >= 2
        assert flagged_up >= 18 and 20 - flagged_orig >= 18, (flagged_up, flagged_orig)


def test_grpo_numerics():
    rng = np.random.default_rng(7)
    with criterion("grpo numerics: 1000 groups of 8, kl sign, clip table", 5.0):
        for _ in range(1000):
            adv = group_advantages(rng.normal(size=8))
            assert abs(adv.mean()) < 1e-9 and abs(adv.std() - 1) < 1e-6
        for _ in range(1000):
            new, old = rng.normal(size=12), rng.normal(size=12)
            assert kl_estimate(new, old) >= 0.0 and kl_estimate(new, new) == 0.0
        assert len(CLIP_TABLE) >= 10
        for ratio, adv, eps, expected in CLIP_TABLE:
            assert abs(clipped_term(ratio, adv, eps) - expected) <= 1e-12


def test_metrics_oracle(tmp_path):
    rng = np.random.default_rng(11)
    manifest = balanced_manifest(tmp_path)
    with criterion("metrics oracle: 1000 random matrices plus degenerate classifiers", 5.0):
        for _ in range(1000):
            assert_matches_oracle(rng.integers(0, 9, size=(3, 4)))
        per, acc, macro = overall_metrics(np.diag([700, 700, 700]))
        assert acc == 1.0 and macro == 1.0 and all(c.f1 == 1.0 and c.acc == 1.0 for c in per.values())
        report = evaluate(manifest, ScriptedPolicy(["<answer>authentic</answer>"]))
        assert report.per_class["authentic"].rec == 1.0
        assert report.per_class["tampered"].rec == 0.0 and report.per_class["synthetic"].rec == 0.0
        assert report.overall_acc == pytest.approx(1 / 3, abs=1e-15)


def fuzz_string(rng: random.Random) -> str:
    parts = []
    for _ in range(rng.randrange(0, 30)):
        if rng.random() < 0.7:
            parts.append(rng.choice(FRAGMENTS))
        else:
            parts.append("".join(chr(rng.randrange(0, 0x3000)) for _ in range(rng.randrange(1, 6))))
    return "".join(parts)


def test_protocol_totality_and_roundtrip():
    rng = random.Random(2024)
    with criterion("protocol: 10000 fuzzed turns total, 500 trajectory round-trips", 30.0):
        for _ in range(10_000):
            text = fuzz_string(rng)
            parsed = parse_turn(text)
            assert all(0 <= d.position < max(len(text), 1) for d in parsed.diagnostics)
        for seed in range(500):
            traj = random_trajectory(seed)
            assert load_trajectory(serialize_trajectory(traj)) == traj


def test_end_to_end_evidence_chain(tmp_path):
    runner = CliRunner()
    image = tmp_path / "clue.png"
    image.write_bytes(encode_png(noise_texture(0, 64)))
    script = tmp_path / "script.txt"
    script.write_text(EVIDENCE_CHAIN_SCRIPT)
    out = tmp_path / "session"
    with criterion("end-to-end evidence chain via the CLI", 30.0):
        res = runner.invoke(main, ["agent", "--image", str(image), "--policy", f"scripted:{script}",
                                   "--out-dir", str(out)])
        assert res.exit_code == 0, res.output
        traj_path = out / "trajectory.traj.jsonl"
        traj = read_trajectory(traj_path)
        assert len(traj.calls) == 4 and traj.termination == "answered"
        res = runner.invoke(main, ["reward", "--trajectory", str(traj_path), "--gold", "tampered"])
        b = json.loads(res.output)["breakdown"]
        cfg = json.loads(res.output)["config"]
        assert b["r_global"] == 1.0 and b["r_coh"] == 1.0 and b["r_crop"] == cfg["b_tamper"] and b["r_format"] == 1.0


def test_gateway_conformance(tmp_path, caplog, monkeypatch):
    import random as _random

    from ifdkit.gateway import Gateway, GatewayConfig, LLMPolicy

    caplog.set_level(logging.DEBUG)
    monkeypatch.setenv("IFDKIT_API_KEY", SECRET)
    with criterion("gateway conformance: golden bodies, 2 backoffs on 429, no key leaks", 10.0):
        traj, requests = run_golden(api_key=SECRET)
        assert [r.body for r in requests] == [(FIXTURES / f"gateway_request_{i}.json").read_bytes() for i in (1, 2)]

        sleeps = []
        responses = [MockResponse(429), MockResponse(429), MockResponse(200, "<answer>authentic</answer>")]
        with MockChatServer(responses) as server:
            gw = Gateway(GatewayConfig(server.url, "m"), sleep=sleeps.append, rng=_random.Random(0))
            traj = run_session([noise_texture(0, 32)], LLMPolicy(gw), SessionConfig(out_dir=tmp_path))
        assert len(sleeps) == 2 and traj.termination == "answered"
        assert SECRET not in caplog.text
        assert all(SECRET.encode() not in p.read_bytes() for p in tmp_path.rglob("*") if p.is_file())
