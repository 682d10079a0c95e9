"""Tagged transcript protocol.

Assistant turns carry tool calls inside ``<code>...</code>`` and the verdict
inside ``<answer>...</answer>``. Code blocks hold one call per line::

    out1 = crop(image_clue_0, 10, 20, 64, 64)   # positional params
    jpeg_ghost(out1, q_step=10)                 # keyword params

``arg0`` is ``image_clue_<n>`` or a name bound by an earlier call. Values are
integers, decimals or quoted strings. :func:`parse_turn` never raises: every
problem becomes a positioned diagnostic and flips ``format_ok`` off.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .toolbox import REGISTRY, ToolName

CLASS_LABELS = ("authentic", "synthetic", "tampered")

_CLUE_RE = re.compile(r"image_clue_(\d+)\Z")
_TAG_RE = re.compile(r"<(/?)(code|answer)>")
_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<comment>\#.*)
  | (?P<number>[+-]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"(?:[^"\\]|\\.)*"|'(?:[^'\\]|\\.)*')
  | (?P<punct>[(),=])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True, order=True)
class ArtifactId:
    namespace: str  # "clue" or "derived"
    index: int

    def __post_init__(self):
        if self.namespace not in ("clue", "derived"):
            raise ValueError(f"bad artifact namespace {self.namespace!r}")
        if self.index < 0:
            raise ValueError("artifact index must be non-negative")

    def __str__(self):
        return f"{self.namespace}:{self.index}"

    @classmethod
    def parse(cls, text: str) -> ArtifactId:
        ns, _, idx = text.partition(":")
        return cls(ns, int(idx))

    @property
    def filename(self) -> str:
        return f"{self.namespace}_{self.index}"


def clue_name(index: int) -> str:
    return f"image_clue_{index}"


def clue_index(ref: str) -> int | None:
    m = _CLUE_RE.match(ref)
    return int(m.group(1)) if m else None


@dataclass(frozen=True)
class Diagnostic:
    position: int
    message: str


@dataclass(frozen=True)
class ToolCallSpec:
    tool: ToolName
    input_ref: str
    params: dict = field(default_factory=dict)
    declared_output: str | None = None
    source: str = ""

    @property
    def call_name(self) -> str:
        from .toolbox import BY_NAME

        return BY_NAME[self.tool].call_name


@dataclass(frozen=True)
class FailedCall:
    """A code line that did not parse under the call grammar."""

    source: str
    position: int
    message: str


@dataclass(frozen=True)
class FinalAnswer:
    label: str
    object: str | None = None

    def __post_init__(self):
        if self.label not in CLASS_LABELS:
            raise ValueError(f"label must be one of {CLASS_LABELS}, got {self.label!r}")

    def render(self) -> str:
        return f"{self.label}: {self.object}" if self.object else self.label


@dataclass(frozen=True)
class ParsedTurn:
    code_blocks: tuple[ToolCallSpec, ...] = ()
    answer: FinalAnswer | None = None
    format_ok: bool = True
    diagnostics: tuple[Diagnostic, ...] = ()
    failed_calls: tuple[FailedCall, ...] = ()
    answer_tags: int = 0


class _LineError(Exception):
    def __init__(self, position: int, message: str):
        self.position = position
        self.message = message


def _tokenize(line: str, base: int) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(line):
        m = _TOKEN_RE.match(line, pos)
        if m is None:
            ch = line[pos]
            if ch in "\"'":
                raise _LineError(base + pos, "unterminated string literal")
            raise _LineError(base + pos, f"unexpected character {ch!r}")
        kind = m.lastgroup
        if kind == "comment":
            break
        if kind != "ws":
            tokens.append((kind, m.group(), base + pos))
        pos = m.end()
    return tokens


def _literal(kind: str, text: str):
    if kind == "number":
        if re.fullmatch(r"[+-]?\d+", text):
            return int(text)
        return float(text)
    body = text[1:-1]
    return re.sub(r"\\(.)", r"\1", body)


def parse_call_line(line: str, base: int = 0) -> ToolCallSpec | None:
    """Parse one statement; None for blank/comment lines. Raises _LineError."""
    tokens = _tokenize(line, base)
    if not tokens:
        return None
    end = base + len(line)
    i = 0

    def peek(offset=0):
        return tokens[i + offset] if i + offset < len(tokens) else None

    def expect(kind, value=None, what=None):
        nonlocal i
        tok = peek()
        if tok is None or tok[0] != kind or (value is not None and tok[1] != value):
            where = tok[2] if tok else end
            found = repr(tok[1]) if tok else "end of line"
            raise _LineError(where, f"expected {what or value or kind}, found {found}")
        i += 1
        return tok

    declared = None
    if peek(1) is not None and peek(1)[1] == "=" and peek()[0] == "ident":
        declared = peek()
        if clue_index(declared[1]) is not None:
            raise _LineError(declared[2], f"cannot assign to reserved name {declared[1]!r}")
        i += 2
    name_tok = expect("ident", what="tool name")
    spec = REGISTRY.get(name_tok[1])
    if spec is None:
        raise _LineError(name_tok[2], f"unknown tool {name_tok[1]!r}")
    expect("punct", "(")
    arg0 = expect("ident", what="image reference (image_clue_<n> or a bound name)")
    params: dict = {}
    positional = 0
    seen_keyword = False
    while True:
        tok = peek()
        if tok is not None and tok[1] == ")":
            i += 1
            break
        expect("punct", ",", what="',' or ')'")
        tok = peek()
        if tok is not None and tok[0] == "ident" and peek(1) is not None and peek(1)[1] == "=":
            key = tok[1]
            if key not in spec.param_names:
                raise _LineError(tok[2], f"{spec.call_name} has no parameter {key!r}")
            if key in params:
                raise _LineError(tok[2], f"parameter {key!r} given twice")
            i += 2
            seen_keyword = True
        else:
            if seen_keyword:
                where = tok[2] if tok else end
                raise _LineError(where, "positional value after keyword argument")
            if positional >= len(spec.params):
                where = tok[2] if tok else end
                raise _LineError(where, f"{spec.call_name} takes at most {len(spec.params)} value(s) after the image")
            key = spec.param_names[positional]
            positional += 1
        val = peek()
        if val is None or val[0] not in ("number", "string"):
            where = val[2] if val else end
            found = repr(val[1]) if val else "end of line"
            raise _LineError(where, f"expected a number or quoted string, found {found}")
        params[key] = _literal(val[0], val[1])
        i += 1
    if i < len(tokens):
        raise _LineError(tokens[i][2], f"unexpected {tokens[i][1]!r} after call")
    return ToolCallSpec(spec.name, arg0[1], params, declared[1] if declared else None, line.strip())


def _parse_code(content: str, base: int, specs: list, failed: list, diags: list) -> None:
    offset = 0
    for line in content.split("\n"):
        try:
            spec = parse_call_line(line, base + offset)
        except _LineError as err:
            failed.append(FailedCall(line.strip(), err.position, err.message))
            diags.append(Diagnostic(err.position, err.message))
        else:
            if spec is not None:
                specs.append(spec)
        offset += len(line) + 1


def parse_answer(content: str) -> FinalAnswer | None:
    label, sep, rest = content.partition(":")
    label = label.strip().lower()
    if label not in CLASS_LABELS:
        return None
    obj = " ".join(rest.split()) if sep else ""
    return FinalAnswer(label, obj or None)


def parse_turn(text: str) -> ParsedTurn:
    specs: list[ToolCallSpec] = []
    failed: list[FailedCall] = []
    diags: list[Diagnostic] = []
    answers: list[FinalAnswer | None] = []
    state = None
    open_pos = 0
    content_start = 0
    for m in _TAG_RE.finditer(text):
        closing, name = m.group(1) == "/", m.group(2)
        if state is None:
            if closing:
                diags.append(Diagnostic(m.start(), f"unmatched </{name}>"))
            else:
                state, open_pos, content_start = name, m.start(), m.end()
        elif closing and name == state:
            content = text[content_start:m.start()]
            if state == "code":
                _parse_code(content, content_start, specs, failed, diags)
            else:
                ans = parse_answer(content)
                if ans is None:
                    diags.append(Diagnostic(content_start if content else m.start(),
                                            f"invalid class token {content.strip()!r}; expected one of {', '.join(CLASS_LABELS)}"))
                if answers:
                    diags.append(Diagnostic(open_pos, "more than one <answer> tag"))
                answers.append(ans)
            state = None
        else:
            diags.append(Diagnostic(m.start(), f"unexpected {m.group()} inside <{state}>"))
    if state is not None:
        diags.append(Diagnostic(open_pos, f"unclosed <{state}>"))
    answer = answers[0] if len(answers) == 1 else None
    limit = max(len(text) - 1, 0)
    diags = [Diagnostic(min(max(d.position, 0), limit), d.message) for d in diags]
    return ParsedTurn(tuple(specs), answer, not diags, tuple(sorted(diags, key=lambda d: d.position)),
                      tuple(failed), len(answers))


def validate_format(traj) -> tuple[float, list[str]]:
    """1.0 iff every assistant turn is well-formed, only the last turn answers,
    and it carries exactly one valid class token."""
    turns = [m.text for m in traj.messages if m.role == "assistant"]
    if not turns:
        return 0.0, ["no assistant turns"]
    problems: list[str] = []
    for n, text in enumerate(turns, start=1):
        parsed = parse_turn(text)
        for d in parsed.diagnostics:
            problems.append(f"turn {n} @{d.position}: {d.message}")
        if n < len(turns) and parsed.answer_tags:
            problems.append(f"turn {n}: answer before the final turn")
        if n == len(turns) and parsed.answer is None and parsed.format_ok:
            problems.append(f"turn {n}: final turn has no valid answer")
    return (0.0 if problems else 1.0), problems
