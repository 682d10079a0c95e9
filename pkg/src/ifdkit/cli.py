"""Command-line entry point: ``ifdkit {tool,agent,reward,grpo,eval,report}``.

Exit codes: 0 success, 1 domain error (bad image, bad config, policy failure),
2 usage error (unknown tool, bad flags).
"""

from __future__ import annotations

import functools
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import click

from . import __version__
from .agent import ScriptedPolicy, SessionConfig, run_session, write_png
from .errors import IFDError
from .evaluation import ACC_MODES, evaluate, load_manifest
from .grpo import clipped_term, group_advantages, kl_estimate
from .raster import read_image
from .rewards import GoldLabel, RewardConfig, score
from .toolbox import REGISTRY
from .toolbox.report import fmt
from .trajectory import read_trajectory


def domain_errors(fn):
    """Map library errors onto exit code 1 with a one-line message."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (IFDError, ValueError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


def parse_value(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def parse_params(items) -> dict:
    params = {}
    for item in items:
        key, sep, val = item.partition("=")
        if not sep or not key.strip():
            raise click.BadParameter(f"expected key=value, got {item!r}", param_hint="--param")
        params[key.strip()] = parse_value(val.strip())
    return params


def parse_floats(text: str, hint: str) -> list[float]:
    if not text.strip():
        return []
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got {text!r}", param_hint=hint) from None


def write_stats(stats: dict, path: Path) -> None:
    path.write_text("".join(f"{k}={fmt(v)}\n" for k, v in stats.items()), encoding="utf-8")


def read_stats(path) -> dict[str, float]:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            k, _, v = line.partition("=")
            out[k] = float(v)
    return out


@click.group()
@click.version_option(__version__, prog_name="ifdkit")
@click.option("-v", "--verbose", count=True, help="Increase log verbosity (-v info, -vv debug).")
def main(verbose: int):
    """Forensic tools, agent sessions, rewards and evaluation."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command("tool")
@click.argument("name")
@click.option("--image", "image_path", required=True, type=click.Path(dir_okay=False), help="Input PNG or JPEG.")
@click.option("--out-dir", type=click.Path(file_okay=False), default=".", show_default=True,
              help="Directory for heatmaps and the stats file.")
@click.option("--param", "params", multiple=True, metavar="KEY=VALUE", help="Tool parameter; repeatable.")
@domain_errors
def cmd_tool(name: str, image_path: str, out_dir: str, params):
    """Run one forensic tool NAME on an image."""
    spec = REGISTRY.get(name)
    if spec is None:
        raise click.UsageError(f"unknown tool {name!r}. Valid tools: {', '.join(REGISTRY)}")
    kwargs = parse_params(params)
    report = spec.func(read_image(image_path), **kwargs)
    if not report.ok:
        click.echo(f"error: {report.reason}", err=True)
        sys.exit(1)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, art in enumerate(report.artifacts):
        stem = name if i == 0 else f"{name}_{art.name}"
        write_png(art.data, out / f"{stem}.png")
    write_stats(report.stats, out / f"{name}_stats.txt")
    click.echo(report.summary_text)


def make_policy(policy: str, base_url: str | None, model: str | None, max_retries: int):
    kind, _, arg = policy.partition(":")
    if kind == "scripted":
        if not arg:
            raise click.BadParameter("use scripted:FILE", param_hint="--policy")
        path = Path(arg)
        if not path.is_file():
            raise click.BadParameter(f"script file {arg!r} not found", param_hint="--policy")
        return ScriptedPolicy.from_file(path)
    if kind == "llm":
        from .gateway import Gateway, GatewayConfig, LLMPolicy

        if not base_url or not model:
            raise click.UsageError("--policy llm needs --base-url and --model (or IFDKIT_BASE_URL / IFDKIT_MODEL)")
        return LLMPolicy(Gateway(GatewayConfig(base_url, model, max_retries=max_retries)))
    raise click.BadParameter(f"expected scripted:FILE or llm, got {policy!r}", param_hint="--policy")


def policy_options(fn):
    fn = click.option("--max-retries", type=int, default=3, show_default=True, help="LLM request retries.")(fn)
    fn = click.option("--model", envvar="IFDKIT_MODEL", help="LLM model name [env IFDKIT_MODEL].")(fn)
    fn = click.option("--base-url", envvar="IFDKIT_BASE_URL",
                      help="Chat-completions base URL [env IFDKIT_BASE_URL]; key from IFDKIT_API_KEY.")(fn)
    fn = click.option("--budget", type=click.IntRange(min=0), default=7, show_default=True,
                      help="Maximum executed tool calls per session.")(fn)
    fn = click.option("--turn-limit", type=click.IntRange(min=1), default=10, show_default=True,
                      help="Maximum assistant turns per session.")(fn)
    return fn


@main.command("agent")
@click.option("--image", "images", required=True, multiple=True, type=click.Path(dir_okay=False),
              help="Clue image; repeat for several clues.")
@click.option("--policy", required=True, help="scripted:FILE (turns separated by '---' lines) or llm.")
@click.option("--out-dir", type=click.Path(file_okay=False), required=True,
              help="Where trajectory.traj.jsonl and artifacts/ are written.")
@policy_options
@domain_errors
def cmd_agent(images, policy, out_dir, budget, turn_limit, base_url, model, max_retries):
    """Run one agent session over the given clue images."""
    pol = make_policy(policy, base_url, model, max_retries)
    clues = [read_image(p) for p in images]
    traj = run_session(clues, pol, SessionConfig(budget=budget, turn_limit=turn_limit, out_dir=Path(out_dir)))
    click.echo(f"final: {traj.final.render() if traj.final else 'none'}")
    click.echo(f"termination: {traj.termination}")
    click.echo(f"calls: {len(traj.calls)} executed, {len(traj.rejected)} rejected")
    click.echo(f"trajectory: {Path(out_dir) / 'trajectory.traj.jsonl'}")
    if traj.termination == "policy_error":
        for note in traj.notes:
            click.echo(f"error: {note}", err=True)
        sys.exit(1)


@main.command("reward")
@click.option("--trajectory", "traj_path", required=True, type=click.Path(dir_okay=False),
              help="A .traj.jsonl file.")
@click.option("--gold", required=True, help="Gold label, optionally with the forged object: tampered,red car")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="Reward config (key = value lines).")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), help="Also write the JSON record here.")
@domain_errors
def cmd_reward(traj_path, gold, config_path, out_path):
    """Score a trajectory and print the reward breakdown as JSON."""
    cfg = RewardConfig.from_file(config_path) if config_path else RewardConfig()
    try:
        gold_label = GoldLabel.parse(gold)
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint="--gold") from None
    traj = read_trajectory(traj_path)
    record = {"trajectory": str(traj_path), "gold": asdict(gold_label), "config": asdict(cfg),
              "breakdown": score(traj, gold_label, cfg).as_dict()}
    text = json.dumps(record, indent=2)
    click.echo(text)
    if out_path:
        Path(out_path).write_text(text + "\n", encoding="utf-8")


@main.group("grpo")
def grpo_group():
    """Group-relative advantage, clipping and KL utilities."""


@grpo_group.command("advantages")
@click.option("--rewards", required=True, help="Comma-separated group rewards, e.g. 1,0,0,1")
@click.option("--eps", type=float, default=1e-8, show_default=True, help="Std stabilizer.")
@domain_errors
def grpo_advantages(rewards, eps):
    """Normalize a group's rewards into advantages."""
    adv = group_advantages(parse_floats(rewards, "--rewards"), eps)
    click.echo(json.dumps({"advantages": [float(a) for a in adv]}))


@grpo_group.command("clip")
@click.option("--ratio", type=float, required=True, help="Importance ratio (> 0).")
@click.option("--advantage", type=float, required=True, help="Advantage value.")
@click.option("--eps", type=float, default=0.2, show_default=True, help="Clip range.")
@domain_errors
def grpo_clip(ratio, advantage, eps):
    """Clipped surrogate term for one ratio and advantage."""
    click.echo(json.dumps({"clipped_term": clipped_term(ratio, advantage, eps)}))


@grpo_group.command("kl")
@click.option("--new", "new", required=True, help="Comma-separated per-token log-probs of the current policy.")
@click.option("--old", "old", required=True, help="Comma-separated per-token log-probs of the reference.")
@domain_errors
def grpo_kl(new, old):
    """Non-negative per-token KL estimate."""
    click.echo(json.dumps({"kl": kl_estimate(parse_floats(new, "--new"), parse_floats(old, "--old"))}))


@main.command("eval")
@click.option("--manifest", required=True, type=click.Path(dir_okay=False), help="JSONL manifest.")
@click.option("--out-dir", required=True, type=click.Path(file_okay=False),
              help="Where report.json, metrics.csv and trajectories/ go.")
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True, help="Parallel sessions.")
@click.option("--policy", required=True, help="scripted:FILE or llm.")
@click.option("--reward-config", type=click.Path(dir_okay=False), help="Score each trajectory with this config.")
@click.option("--acc-mode", type=click.Choice(ACC_MODES), default="one_vs_rest", show_default=True,
              help="Definition of the per-class accuracy column.")
@policy_options
@domain_errors
def cmd_eval(manifest, out_dir, workers, policy, reward_config, acc_mode, budget, turn_limit, base_url, model,
             max_retries):
    """Evaluate a policy over a manifest and write metrics."""
    entries = load_manifest(manifest)
    pol = make_policy(policy, base_url, model, max_retries)
    rcfg = RewardConfig.from_file(reward_config) if reward_config else None
    report = evaluate(entries, pol, SessionConfig(budget=budget, turn_limit=turn_limit), rcfg, workers,
                      out_dir, acc_mode)
    click.echo(report.to_csv(), nl=False)
    failed = sum(report.failures.values())
    click.echo(f"evaluated {report.n_evaluated} of {len(entries)} entries ({failed} failed)")


@main.command("report")
@click.argument("path", type=click.Path(exists=True))
@domain_errors
def cmd_report(path):
    """Summarize a trajectory (.traj.jsonl) or an evaluation directory / report.json."""
    p = Path(path)
    if p.is_dir():
        p = p / "report.json"
    if p.name.endswith(".jsonl"):
        traj = read_trajectory(p)
        click.echo(f"turns: {traj.T}")
        for c in traj.calls:
            status = "ok" if c.ok else f"failed ({c.reason})"
            click.echo(f"  [{c.step}] turn {c.turn}: {c.spec.source or c.spec.call_name} -> {status}")
        for r in traj.rejected:
            click.echo(f"  [rejected] turn {r.turn}: {r.spec.source} ({r.reason})")
        for f in traj.parse_failures:
            click.echo(f"  [unparsed] turn {f.turn}: {f.failure.source} ({f.failure.message})")
        click.echo(f"final: {traj.final.render() if traj.final else 'none'}")
        click.echo(f"termination: {traj.termination}")
        return
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
        click.echo(data["acc_definition"])
        for label, m in data["per_class"].items():
            click.echo(f"  {label:<10} acc={m['acc']:.4f} prec={m['prec']:.4f} rec={m['rec']:.4f} f1={m['f1']:.4f}")
        click.echo(f"  overall    acc={data['overall']['acc']:.4f} f1={data['overall']['f1']:.4f}")
        click.echo(f"  tool calls per class: {json.dumps(data['tool_usage']['histograms'])}")
    except (OSError, ValueError, KeyError) as exc:
        raise IFDError(f"{p} is not an evaluation report: {exc}") from None


if __name__ == "__main__":  # pragma: no cover
    main()
