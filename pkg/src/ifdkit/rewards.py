"""Verifiable rewards over finalized trajectories.

The tool reward mixes four process terms (low-level-first priority, call
success rate, crop usage keyed on the predicted class, crop-then-probe
coherence); the total mixes accuracy, format and tool rewards linearly.
Every function here is pure.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .protocol import CLASS_LABELS, validate_format
from .toolbox import T_BASIC, T_LOW, ToolName
from .trajectory import Trajectory


@dataclass(frozen=True)
class RewardConfig:
    gamma: float = 0.9
    b_tamper: float = 1.0
    b_auth: float = 0.1
    b_syn: float = 0.2
    lambda_global: float = 0.3
    lambda_logic: float = 0.3
    lambda_crop: float = 0.2
    lambda_coh: float = 0.2
    lambda_acc: float = 1.0
    lambda_format: float = 0.5
    lambda_tool: float = 0.5
    strict_object_match: bool = False

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "strict_object_match":
                if not isinstance(v, bool):
                    raise ConfigError(f"strict_object_match must be a boolean, got {v!r}")
                continue
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"{f.name} must be a finite number, got {v!r}")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError(f"gamma must lie in (0, 1), got {self.gamma}")
        for name in ("lambda_global", "lambda_logic", "lambda_crop", "lambda_coh",
                     "lambda_acc", "lambda_format", "lambda_tool"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")

    def crop_weight(self, label: str) -> float:
        return {"tampered": self.b_tamper, "authentic": self.b_auth, "synthetic": self.b_syn}[label]

    def to_text(self) -> str:
        return "".join(f"{k} = {str(v).lower() if isinstance(v, bool) else repr(v)}\n" for k, v in asdict(self).items())

    @classmethod
    def from_text(cls, text: str) -> RewardConfig:
        """Parse ``key = value`` lines; ``#`` starts a comment, unknown keys are errors."""
        known = {f.name for f in fields(cls)}
        values: dict = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = (s.strip() for s in line.partition("="))
            if not sep or not key:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            if key not in known:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key in values:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            if key == "strict_object_match":
                if val.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    raise ConfigError(f"line {lineno}: {key} must be true or false, got {val!r}")
                values[key] = val.lower() in ("true", "1", "yes")
            else:
                try:
                    values[key] = float(val)
                except ValueError:
                    raise ConfigError(f"line {lineno}: {key} must be a number, got {val!r}") from None
        return cls(**values)

    @classmethod
    def from_file(cls, path) -> RewardConfig:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read reward config {path}: {exc}") from exc
        return cls.from_text(text)


@dataclass(frozen=True)
class GoldLabel:
    label: str
    forged_object: str | None = None

    def __post_init__(self):
        if self.label not in CLASS_LABELS:
            raise ValueError(f"gold label must be one of {CLASS_LABELS}, got {self.label!r}")
        if self.forged_object is not None and self.label != "tampered":
            raise ValueError("forged_object is only allowed for tampered images")

    @classmethod
    def parse(cls, text: str) -> GoldLabel:
        """``"tampered,red car"`` or ``"authentic"``."""
        label, _, obj = text.partition(",")
        return cls(label.strip().lower(), obj.strip() or None)


@dataclass(frozen=True)
class RewardBreakdown:
    r_acc: float
    r_format: float
    r_global: float
    r_logic: float
    r_crop: float
    r_coh: float
    r_tool: float
    r_total: float
    t_low: int | None = None
    t_basic: int | None = None
    diagnostics: tuple[str, ...] = field(default=())

    def as_dict(self) -> dict:
        d = asdict(self)
        d["diagnostics"] = list(self.diagnostics)
        return d


def first_use_steps(traj: Trajectory) -> tuple[int | None, int | None]:
    """First executed step using a low-level tool and a basic tool (1-based)."""
    t_low = next((c.step for c in traj.calls if c.action in T_LOW), None)
    t_basic = next((c.step for c in traj.calls if c.action in T_BASIC), None)
    return t_low, t_basic


def global_priority(t_low: int | None, t_basic: int | None, gamma: float) -> float:
    """[t_low < t_basic] * gamma**(t_low - 1), with a missing t_basic treated as +inf."""
    if t_low is None:
        return 0.0
    if t_basic is not None and not t_low < t_basic:
        return 0.0
    return gamma ** (t_low - 1)


def reward_global(traj: Trajectory, cfg: RewardConfig = RewardConfig()) -> float:
    t_low, t_basic = first_use_steps(traj)
    return global_priority(t_low, t_basic, cfg.gamma)


def reward_logic(traj: Trajectory) -> float:
    attempted = traj.attempted_calls
    if attempted == 0:
        return 0.0
    return sum(1 for c in traj.calls if c.ok) / attempted


def crop_used(traj: Trajectory) -> bool:
    return any(c.action is ToolName.CROP for c in traj.calls)


def reward_crop(traj: Trajectory, cfg: RewardConfig = RewardConfig()) -> float:
    if traj.final is None or not crop_used(traj):
        return 0.0
    return cfg.crop_weight(traj.final.label)


def reward_coherence(traj: Trajectory) -> float:
    """1.0 when some crop is immediately followed by a low-level tool reading the crop's output."""
    for prev, nxt in zip(traj.calls, traj.calls[1:]):
        if (prev.action is ToolName.CROP and nxt.action in T_LOW
                and prev.output_id is not None and nxt.input_id == prev.output_id):
            return 1.0
    return 0.0


def reward_accuracy(traj: Trajectory, gold: GoldLabel, cfg: RewardConfig = RewardConfig()) -> float:
    final = traj.final
    if final is None or final.label != gold.label:
        return 0.0
    if cfg.strict_object_match and gold.label == "tampered" and gold.forged_object:
        said = (final.object or "").lower()
        if not any(tok.lower() in said for tok in gold.forged_object.split()):
            return 0.0
    return 1.0


def compose_tool(cfg: RewardConfig, r_global: float, r_logic: float, r_crop: float, r_coh: float) -> float:
    return (cfg.lambda_global * r_global + cfg.lambda_logic * r_logic
            + cfg.lambda_crop * r_crop + cfg.lambda_coh * r_coh)


def compose_total(cfg: RewardConfig, r_acc: float, r_format: float, r_tool: float) -> float:
    return cfg.lambda_acc * r_acc + cfg.lambda_format * r_format + cfg.lambda_tool * r_tool


def score(traj: Trajectory, gold: GoldLabel, cfg: RewardConfig | None = None) -> RewardBreakdown:
    cfg = RewardConfig() if cfg is None else cfg
    if not isinstance(cfg, RewardConfig):
        raise ConfigError(f"expected RewardConfig, got {type(cfg).__name__}")
    t_low, t_basic = first_use_steps(traj)
    r_acc = reward_accuracy(traj, gold, cfg)
    r_format, problems = validate_format(traj)
    r_global = reward_global(traj, cfg)
    r_logic = reward_logic(traj)
    r_crop = reward_crop(traj, cfg)
    r_coh = reward_coherence(traj)
    r_tool = compose_tool(cfg, r_global, r_logic, r_crop, r_coh)
    r_total = compose_total(cfg, r_acc, r_format, r_tool)

    diags = [f"format: {p}" for p in problems]
    diags.append(f"t_low={t_low} t_basic={t_basic}")
    ok = sum(1 for c in traj.calls if c.ok)
    diags.append(f"calls: {ok} ok / {len(traj.calls)} executed / {len(traj.rejected)} rejected / "
                 f"{len(traj.parse_failures)} unparsed")
    if traj.final is None:
        diags.append(f"no final answer (termination={traj.termination})")
    return RewardBreakdown(r_acc, r_format, r_global, r_logic, r_crop, r_coh, r_tool, r_total,
                           t_low, t_basic, tuple(diags))
