"""Multi-turn agent loop over the fixed tool registry.

A session preloads the clue images, asks the policy for a turn, executes the
parsed calls (never more than the budget), feeds one observation message back
and stops on a valid answer, after a forced-answer turn, or at the turn limit.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol, Sequence, Union

from .errors import PolicyError
from .prompt import DEFAULT_QUESTION, FORCED_ANSWER_PROMPT, render_system_prompt
from .protocol import ArtifactId, ToolCallSpec, clue_index, clue_name, parse_turn
from .raster import Raster, encode_png
from .toolbox import BY_NAME, HeatMap, ToolReport
from .toolbox.report import fmt
from .trajectory import ArtifactRef, Message, ParseFailure, RejectedCall, ToolCall, Trajectory, write_trajectory

log = logging.getLogger(__name__)

ArtifactData = Union[Raster, HeatMap]


@dataclass
class SessionConfig:
    budget: int = 7
    turn_limit: int = 10
    char_cap: int = 80_000
    question: str = DEFAULT_QUESTION
    system_prompt: str | None = None
    out_dir: Path | None = None

    def __post_init__(self):
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        if self.turn_limit < 1:
            raise ValueError("turn_limit must be >= 1")


@dataclass(frozen=True)
class TranscriptView:
    """What a policy sees: the messages so far and a resolver for their images."""

    messages: tuple[Message, ...]
    resolve: Callable[[ArtifactId], ArtifactData]
    note: Callable[[str], None] = lambda text: None  # appends to the trajectory's notes


class Policy(Protocol):
    def next_turn(self, view: TranscriptView) -> str: ...


class ScriptedPolicy:
    """Replays fixed assistant turns in order; returns "" once the script runs out."""

    def __init__(self, turns: Sequence[str]):
        self.turns = list(turns)

    @classmethod
    def from_text(cls, text: str) -> ScriptedPolicy:
        turns, current = [], []
        for line in text.splitlines():
            if line.strip() == "---":
                turns.append("\n".join(current).strip("\n"))
                current = []
            else:
                current.append(line)
        if any(s.strip() for s in current):
            turns.append("\n".join(current).strip("\n"))
        return cls(turns)

    @classmethod
    def from_file(cls, path) -> ScriptedPolicy:
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    def next_turn(self, view: TranscriptView) -> str:
        n = sum(1 for m in view.messages if m.role == "assistant")
        return self.turns[n] if n < len(self.turns) else ""


class Session:
    def __init__(self, clues: Sequence[Raster], config: SessionConfig | None = None):
        if not clues:
            raise ValueError("a session needs at least one clue image")
        self.config = config or SessionConfig()
        self.clues: dict[ArtifactId, Raster] = {ArtifactId("clue", i): c for i, c in enumerate(clues)}
        self.derived: dict[ArtifactId, ArtifactData] = {}
        self.bindings: dict[str, ArtifactId] = {}
        self.messages: list[Message] = []
        self.calls: list[ToolCall] = []
        self.rejected: list[RejectedCall] = []
        self.parse_failures: list[ParseFailure] = []
        self.notes: list[str] = []

    @property
    def budget_left(self) -> int:
        return self.config.budget - len(self.calls)

    @property
    def turns(self) -> int:
        return sum(1 for m in self.messages if m.role == "assistant")

    def artifact(self, aid: ArtifactId) -> ArtifactData:
        return self.clues[aid] if aid.namespace == "clue" else self.derived[aid]

    def resolve(self, ref: str) -> ArtifactId:
        idx = clue_index(ref)
        if idx is not None:
            aid = ArtifactId("clue", idx)
            if aid not in self.clues:
                raise KeyError(ref)
            return aid
        return self.bindings[ref]

    def view(self) -> TranscriptView:
        return TranscriptView(tuple(self.messages), self.artifact, self.notes.append)

    def _register(self, report: ToolReport) -> tuple[ArtifactRef, ...]:
        refs = []
        for art in report.artifacts:
            aid = ArtifactId("derived", len(self.derived))
            self.derived[aid] = art.data
            refs.append(ArtifactRef(aid, art.name, art.kind, art.data.width, art.data.height))
        return tuple(refs)

    def finalize(self, final, termination: str) -> Trajectory:
        return Trajectory(tuple(self.messages), tuple(self.calls), tuple(self.rejected),
                          tuple(self.parse_failures), final, termination, tuple(self.notes))


def execute_call(session: Session, spec: ToolCallSpec, turn: int = 0) -> ToolCall:
    """Run one parsed call against the registry; failures are recorded, never raised."""
    if session.budget_left <= 0:
        raise RuntimeError("tool budget exhausted")  # callers check the budget first
    start = time.perf_counter()
    input_id = None
    try:
        input_id = session.resolve(spec.input_ref)
    except KeyError:
        report = ToolReport.failed(spec.tool, spec.params, f"unknown artifact {spec.input_ref!r}")
    else:
        data = session.artifact(input_id)
        img = data if isinstance(data, Raster) else data.to_raster()
        report = BY_NAME[spec.tool].func(img, **spec.params)
    outputs = session._register(report)
    if report.ok and spec.declared_output and outputs:
        session.bindings[spec.declared_output] = outputs[0].id
    call = ToolCall(
        step=len(session.calls) + 1, turn=turn, spec=spec, input_id=input_id, status=report.status,
        reason=report.reason, params=dict(report.params), stats=dict(report.stats), outputs=outputs,
        summary=report.summary_text, wall_time=time.perf_counter() - start,
    )
    session.calls.append(call)
    return call


def render_call(call: ToolCall) -> str:
    head = f"[call {call.step}] {call.spec.source or call.spec.call_name}"
    if call.ok:
        outs = ", ".join(f"{o.id} ({o.name})" for o in call.outputs)
        lines = [f"{head} -> {outs}", call.summary]
        lines += [f"{k}={fmt(v)}" for k, v in call.stats.items()]
    else:
        lines = [f"{head} -> failed: {call.reason}"]
    return "\n".join(lines)


def _observation(calls: list[ToolCall], rejected: list[RejectedCall], failures: list[ParseFailure]) -> Message:
    parts = [render_call(c) for c in calls]
    parts += [f"[rejected] {r.spec.source}: {r.reason}" for r in rejected]
    parts += [f"[parse error @{f.failure.position}] {f.failure.source}: {f.failure.message}" for f in failures]
    if not parts:
        parts = ["No tool call or answer found. Put tool calls inside <code>...</code> "
                 "or give the verdict inside <answer>...</answer>."]
    refs = tuple(o.id for c in calls for o in c.outputs)
    return Message("observation", "\n\n".join(parts), refs)


def _ask(session: Session, policy: Policy) -> str:
    reply = policy.next_turn(session.view())
    if not isinstance(reply, str):
        raise PolicyError(f"policy returned {type(reply).__name__}, expected str")
    cap = session.config.char_cap
    if len(reply) > cap:
        session.notes.append(f"turn {session.turns + 1}: reply truncated from {len(reply)} to {cap} characters")
        reply = reply[:cap]
    session.messages.append(Message("assistant", reply))
    return reply


def forced_answer_turn(session: Session, policy: Policy):
    """Ask for a verdict with tools disabled; any calls in the reply are rejected."""
    session.messages.append(Message("user", FORCED_ANSWER_PROMPT))
    parsed = parse_turn(_ask(session, policy))
    turn = session.turns
    session.parse_failures += [ParseFailure(turn, f) for f in parsed.failed_calls]
    session.rejected += [RejectedCall(turn, s, "forced answer turn: tools disabled") for s in parsed.code_blocks]
    return parsed.answer


def run_session(clues: Sequence[Raster], policy: Policy, config: SessionConfig | None = None) -> Trajectory:
    session = Session(clues, config)
    traj = _run(session, policy)
    if session.config.out_dir is not None:
        export_session(session, traj, session.config.out_dir)
    return traj


def _run(session: Session, policy: Policy) -> Trajectory:
    cfg = session.config
    system = cfg.system_prompt or render_system_prompt(list(session.clues.values()), budget=cfg.budget)
    session.messages.append(Message("system", system))
    session.messages.append(Message("user", cfg.question, tuple(session.clues)))
    try:
        while True:
            exhausted = session.budget_left <= 0
            if exhausted or session.turns >= cfg.turn_limit - 1:
                final = forced_answer_turn(session, policy)
                if final is not None:
                    return session.finalize(final, "answered")
                return session.finalize(None, "budget_exhausted" if exhausted else "turn_limit")

            parsed = parse_turn(_ask(session, policy))
            turn = session.turns
            failures = [ParseFailure(turn, f) for f in parsed.failed_calls]
            session.parse_failures += failures
            if parsed.answer is not None:
                session.rejected += [RejectedCall(turn, s, "call after the final answer") for s in parsed.code_blocks]
                return session.finalize(parsed.answer, "answered")

            executed, rejected = [], []
            for spec in parsed.code_blocks:
                if session.budget_left > 0:
                    executed.append(execute_call(session, spec, turn))
                else:
                    rejected.append(RejectedCall(turn, spec, f"tool budget exhausted ({cfg.budget} calls)"))
            session.rejected += rejected
            session.messages.append(_observation(executed, rejected, failures))
    except PolicyError as exc:
        log.warning("policy failed: %s", exc)
        session.notes.append(f"policy error: {exc}")
        return session.finalize(None, "policy_error")


def export_session(session: Session, traj: Trajectory, out_dir) -> Path:
    """Write ``trajectory.traj.jsonl`` and PNGs for every clue and derived artifact."""
    out = Path(out_dir)
    art_dir = out / "artifacts"
    art_dir.mkdir(parents=True, exist_ok=True)
    for aid, data in [*session.clues.items(), *session.derived.items()]:
        write_png(data, art_dir / f"{aid.filename}.png")
    path = out / "trajectory.traj.jsonl"
    write_trajectory(traj, path)
    return path


def write_png(data: ArtifactData, path: Path) -> None:
    """Rasters are written as-is; heatmaps are min-max normalized with a sidecar of the constants."""
    path = Path(path)
    if isinstance(data, HeatMap):
        norm, lo, hi = data.normalized()
        path.write_bytes(encode_png(Raster(norm)))
        path.with_suffix(".txt").write_text(
            f"min={lo!r}\nmax={hi!r}\nblock={data.block}\ndomain={data.domain}\nnote={data.scale_note}\n",
            encoding="utf-8",
        )
    else:
        path.write_bytes(encode_png(data))


__all__ = [
    "Policy", "ScriptedPolicy", "Session", "SessionConfig", "TranscriptView", "clue_name", "execute_call",
    "export_session", "forced_answer_turn", "render_call", "run_session", "write_png",
]
