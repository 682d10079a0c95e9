"""Finalized session records and their ``.traj.jsonl`` serialization.

One JSON object per line, each carrying the schema version ``v``:

========== ==========================================================
event      fields
========== ==========================================================
message    role, text, image_refs
call       step, turn, tool, input_ref, params, declared_output, source,
           input_id, status, reason, stats, outputs, summary, wall_time
rejected   turn, source, reason, spec
parse_fail turn, source, position, message
answer     label, object
end        termination (only when the session ended without an answer)
note       text
========== ==========================================================

Records are written in chronological order; loading groups them by event.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

from .errors import SchemaError
from .protocol import ArtifactId, FailedCall, FinalAnswer, ToolCallSpec
from .toolbox import ToolName

SCHEMA_VERSION = 1
ROLES = ("system", "user", "assistant", "observation")
TERMINATIONS = ("answered", "budget_exhausted", "turn_limit", "policy_error")


@dataclass(frozen=True)
class Message:
    role: str
    text: str
    image_refs: tuple[ArtifactId, ...] = ()

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")


@dataclass(frozen=True)
class ArtifactRef:
    id: ArtifactId
    name: str
    kind: str  # "heatmap" or "raster"
    width: int
    height: int


@dataclass(frozen=True)
class ToolCall:
    """An executed call; ``step`` counts executed calls from 1."""

    step: int
    turn: int
    spec: ToolCallSpec
    input_id: ArtifactId | None
    status: str
    reason: str | None = None
    params: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)
    outputs: tuple[ArtifactRef, ...] = ()
    summary: str = ""
    wall_time: float = 0.0

    @property
    def action(self) -> ToolName:
        return self.spec.tool

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def output_id(self) -> ArtifactId | None:
        return self.outputs[0].id if self.outputs else None


@dataclass(frozen=True)
class RejectedCall:
    """A parsed call that was not executed (over budget, forced-answer turn, after the answer)."""

    turn: int
    spec: ToolCallSpec
    reason: str


@dataclass(frozen=True)
class ParseFailure:
    turn: int
    failure: FailedCall


@dataclass(frozen=True)
class Trajectory:
    messages: tuple[Message, ...] = ()
    calls: tuple[ToolCall, ...] = ()
    rejected: tuple[RejectedCall, ...] = ()
    parse_failures: tuple[ParseFailure, ...] = ()
    final: FinalAnswer | None = None
    termination: str | None = None
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        if self.termination is not None and self.termination not in TERMINATIONS:
            raise ValueError(f"unknown termination {self.termination!r}")
        if (self.final is not None and self.termination != "answered") or \
                (self.termination == "answered" and self.final is None):
            raise ValueError("termination='answered' iff a final answer is present")

    @property
    def T(self) -> int:
        return sum(1 for m in self.messages if m.role == "assistant")

    @property
    def attempted_calls(self) -> int:
        return len(self.calls) + len(self.rejected) + len(self.parse_failures)


# -- serialization ---------------------------------------------------------

def _spec_record(spec: ToolCallSpec) -> dict:
    return {
        "tool": spec.tool.value,
        "input_ref": spec.input_ref,
        "params": spec.params,
        "declared_output": spec.declared_output,
        "source": spec.source,
    }


def _records(traj: Trajectory) -> Iterable[dict]:
    by_turn: dict[int, list[dict]] = {}

    def add(turn, rec):
        by_turn.setdefault(turn, []).append(rec)

    for pf in traj.parse_failures:
        add(pf.turn, {"event": "parse_fail", "turn": pf.turn, "source": pf.failure.source,
                      "position": pf.failure.position, "message": pf.failure.message})
    for c in traj.calls:
        rec = {"event": "call", "step": c.step, "turn": c.turn, **_spec_record(c.spec),
               "input_id": str(c.input_id) if c.input_id else None,
               "status": c.status, "reason": c.reason, "call_params": c.params, "stats": c.stats,
               "outputs": [{"id": str(o.id), "name": o.name, "kind": o.kind, "width": o.width,
                            "height": o.height} for o in c.outputs],
               "summary": c.summary, "wall_time": c.wall_time}
        add(c.turn, rec)
    for r in traj.rejected:
        add(r.turn, {"event": "rejected", "turn": r.turn, "reason": r.reason, "spec": _spec_record(r.spec)})

    turn = 0
    for m in traj.messages:
        yield {"event": "message", "role": m.role, "text": m.text, "image_refs": [str(i) for i in m.image_refs]}
        if m.role == "assistant":
            turn += 1
            yield from by_turn.pop(turn, [])
    for t in sorted(by_turn):
        yield from by_turn[t]
    if traj.final is not None:
        yield {"event": "answer", "label": traj.final.label, "object": traj.final.object}
    elif traj.termination is not None:
        yield {"event": "end", "termination": traj.termination}
    for note in traj.notes:
        yield {"event": "note", "text": note}


def serialize_trajectory(traj: Trajectory) -> bytes:
    lines = [json.dumps({"v": SCHEMA_VERSION, **rec}, ensure_ascii=False) for rec in _records(traj)]
    return ("\n".join(lines) + "\n").encode("utf-8") if lines else b""


def _req(rec: dict, key: str, lineno: int):
    if key not in rec:
        raise SchemaError(f"line {lineno}: {rec.get('event', 'record')!r} record is missing {key!r}")
    return rec[key]


def _load_spec(rec: dict, lineno: int) -> ToolCallSpec:
    try:
        tool = ToolName(_req(rec, "tool", lineno))
    except ValueError as exc:
        raise SchemaError(f"line {lineno}: {exc}") from None
    return ToolCallSpec(tool, _req(rec, "input_ref", lineno), dict(_req(rec, "params", lineno)),
                        rec.get("declared_output"), rec.get("source", ""))


def load_trajectory(data: bytes | str) -> Trajectory:
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    messages, calls, rejected, failures, notes = [], [], [], [], []
    final = None
    termination = None
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"line {lineno}: not valid JSON ({exc.msg})") from None
        if not isinstance(rec, dict):
            raise SchemaError(f"line {lineno}: record must be an object")
        version = _req(rec, "v", lineno)
        if version != SCHEMA_VERSION:
            raise SchemaError(f"line {lineno}: unsupported schema version {version!r} (expected {SCHEMA_VERSION})")
        event = _req(rec, "event", lineno)
        try:
            if event == "message":
                messages.append(Message(_req(rec, "role", lineno), _req(rec, "text", lineno),
                                        tuple(ArtifactId.parse(s) for s in rec.get("image_refs", []))))
            elif event == "call":
                outputs = tuple(
                    ArtifactRef(ArtifactId.parse(o["id"]), o["name"], o["kind"], o["width"], o["height"])
                    for o in _req(rec, "outputs", lineno)
                )
                input_id = rec.get("input_id")
                calls.append(ToolCall(
                    step=_req(rec, "step", lineno), turn=_req(rec, "turn", lineno), spec=_load_spec(rec, lineno),
                    input_id=ArtifactId.parse(input_id) if input_id else None,
                    status=_req(rec, "status", lineno), reason=rec.get("reason"),
                    params=dict(rec.get("call_params", {})), stats=dict(rec.get("stats", {})), outputs=outputs,
                    summary=rec.get("summary", ""), wall_time=float(rec.get("wall_time", 0.0)),
                ))
            elif event == "rejected":
                rejected.append(RejectedCall(_req(rec, "turn", lineno), _load_spec(_req(rec, "spec", lineno), lineno),
                                             _req(rec, "reason", lineno)))
            elif event == "parse_fail":
                failures.append(ParseFailure(_req(rec, "turn", lineno), FailedCall(
                    _req(rec, "source", lineno), _req(rec, "position", lineno), _req(rec, "message", lineno))))
            elif event == "answer":
                final = FinalAnswer(_req(rec, "label", lineno), rec.get("object"))
                termination = "answered"
            elif event == "end":
                termination = _req(rec, "termination", lineno)
            elif event == "note":
                notes.append(_req(rec, "text", lineno))
            else:
                raise SchemaError(f"line {lineno}: unknown event {event!r}")
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"line {lineno}: malformed {event!r} record: {exc}") from None
    calls.sort(key=lambda c: c.step)
    rejected.sort(key=lambda r: r.turn)
    failures.sort(key=lambda f: f.turn)
    try:
        return Trajectory(tuple(messages), tuple(calls), tuple(rejected), tuple(failures), final, termination,
                          tuple(notes))
    except ValueError as exc:
        raise SchemaError(str(exc)) from None


def write_trajectory(traj: Trajectory, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_trajectory(traj))


def read_trajectory(path) -> Trajectory:
    try:
        with open(path, "rb") as fh:
            return load_trajectory(fh.read())
    except OSError as exc:
        raise SchemaError(f"cannot read trajectory {path}: {exc}") from exc
