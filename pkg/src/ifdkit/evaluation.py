"""Batch evaluation: manifest ingestion, per-entry sessions, metrics and tool usage.

Manifest lines are JSON objects::

    {"id": "t001", "path": "img/t001.jpg", "label": "tampered",
     "generator": "sd-inpaint", "forged_object": "red car", "mask_path": "mask/t001.png"}

``path`` and ``mask_path`` are resolved against the manifest's directory.
Fields other than the known ones are kept in ``ManifestEntry.extra``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from .agent import Policy, SessionConfig, run_session
from .errors import IFDError, ManifestError
from .protocol import CLASS_LABELS
from .raster import read_image
from .rewards import GoldLabel, RewardConfig, score
from .toolbox import T_LOW, ToolName
from .trajectory import Trajectory

log = logging.getLogger(__name__)

ABSTAIN = "none"
PRED_COLUMNS = (*CLASS_LABELS, ABSTAIN)
ACC_MODES = ("one_vs_rest", "within_class")
_KNOWN = ("id", "path", "label", "generator", "forged_object", "mask_path")


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    path: Path
    label: str
    generator: str = ""
    forged_object: str | None = None
    mask_path: Path | None = None
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def gold(self) -> GoldLabel:
        return GoldLabel(self.label, self.forged_object)


def _entry(rec, lineno: int, base: Path) -> ManifestEntry:
    if not isinstance(rec, dict):
        raise ManifestError("record must be a JSON object", line=lineno)
    for key in ("id", "path", "label"):
        if key not in rec:
            raise ManifestError(f"missing required field {key!r}", line=lineno)
    for key in ("id", "path", "label", "generator"):
        if key in rec and not isinstance(rec[key], str):
            raise ManifestError(f"field {key!r} must be a string", line=lineno)
    for key in ("forged_object", "mask_path"):
        if rec.get(key) is not None and not isinstance(rec[key], str):
            raise ManifestError(f"field {key!r} must be a string or null", line=lineno)
    label = rec["label"]
    if label not in CLASS_LABELS:
        raise ManifestError(f"label must be one of {', '.join(CLASS_LABELS)}, got {label!r}", line=lineno)
    if label != "tampered":
        for key in ("forged_object", "mask_path"):
            if rec.get(key) is not None:
                raise ManifestError(f"{key!r} is only allowed for tampered entries", line=lineno)
    mask = rec.get("mask_path")
    return ManifestEntry(
        id=rec["id"], path=base / rec["path"], label=label, generator=rec.get("generator", ""),
        forged_object=rec.get("forged_object"), mask_path=base / mask if mask else None,
        extra={k: v for k, v in rec.items() if k not in _KNOWN},
    )


def parse_manifest(text: str, base: Path = Path(".")) -> list[ManifestEntry]:
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"invalid JSON: {exc.msg}", line=lineno) from None
        entry = _entry(rec, lineno, base)
        if entry.id in seen:
            raise ManifestError(f"duplicate id {entry.id!r}", line=lineno)
        seen.add(entry.id)
        entries.append(entry)
    return entries


def load_manifest(path) -> list[ManifestEntry]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    return parse_manifest(text, path.parent)


# -- metrics -----------------------------------------------------------------

@dataclass(frozen=True)
class ClassMetrics:
    acc: float
    prec: float
    rec: float
    f1: float


def confusion_matrix(gold: Iterable[str], pred: Iterable[str | None]) -> np.ndarray:
    """Rows are gold classes, columns predicted classes plus a trailing abstain column."""
    m = np.zeros((len(CLASS_LABELS), len(PRED_COLUMNS)), dtype=np.int64)
    for g, p in zip(gold, pred):
        m[CLASS_LABELS.index(g), PRED_COLUMNS.index(p if p is not None else ABSTAIN)] += 1
    return m


def _ratio(num: float, den: float) -> float:
    return float(num / den) if den > 0 else 0.0


def class_metrics(matrix, acc_mode: str = "one_vs_rest") -> dict[str, ClassMetrics]:
    """Per-class metrics from a 3x3 or 3x4 (with abstentions) confusion matrix."""
    if acc_mode not in ACC_MODES:
        raise ValueError(f"acc_mode must be one of {ACC_MODES}")
    m = np.asarray(matrix, dtype=np.int64)
    if m.shape == (3, 3):
        m = np.hstack([m, np.zeros((3, 1), dtype=np.int64)])
    if m.shape != (3, 4) or (m < 0).any():
        raise ValueError(f"confusion matrix must be non-negative with shape 3x3 or 3x4, got {m.shape}")
    n = int(m.sum())
    out = {}
    for i, label in enumerate(CLASS_LABELS):
        tp = int(m[i, i])
        fp = int(m[:, i].sum()) - tp
        fn = int(m[i, :].sum()) - tp
        tn = n - tp - fp - fn
        prec, rec = _ratio(tp, tp + fp), _ratio(tp, tp + fn)
        f1 = 2 * prec * rec / (prec + rec) if prec + rec > 0 else 0.0
        acc = _ratio(tp + tn, n) if acc_mode == "one_vs_rest" else rec
        out[label] = ClassMetrics(acc, prec, rec, f1)
    return out


def overall_metrics(matrix, acc_mode: str = "one_vs_rest") -> tuple[dict[str, ClassMetrics], float, float]:
    """(per-class metrics, 3-class accuracy, macro-F1)."""
    m = np.asarray(matrix, dtype=np.int64)
    per = class_metrics(m, acc_mode)
    n = int(m.sum())
    acc = _ratio(int(np.trace(m[:, :3])), n)
    macro = sum(c.f1 for c in per.values()) / len(per)
    return per, acc, macro


def tool_usage_stats(trajectories: Sequence[Trajectory], labels: Sequence[str], budget: int = 7) -> dict:
    """Per-class histograms of executed-call counts and low-level tool frequencies."""
    hist: dict[str, Counter] = {label: Counter() for label in CLASS_LABELS}
    counts: Counter = Counter()
    for traj, label in zip(trajectories, labels):
        hist[label][len(traj.calls)] += 1
        counts.update(c.action for c in traj.calls if c.action in T_LOW)
    total = sum(counts.values())
    low = [t for t in ToolName if t in T_LOW]
    return {
        "histograms": {label: dict(sorted(h.items())) for label, h in hist.items()},
        "histogram_range": [0, budget],
        "low_level_counts": {t.value: counts.get(t, 0) for t in low},
        "low_level_frequencies": {t.value: _ratio(counts.get(t, 0), total) for t in low},
    }


# -- batch evaluation --------------------------------------------------------

@dataclass(frozen=True)
class EntryResult:
    id: str
    label: str
    predicted: str | None = None
    termination: str | None = None
    n_calls: int = 0
    trajectory_path: str | None = None
    reward: dict | None = None
    error: str | None = None


@dataclass
class EvalReport:
    per_class: dict[str, ClassMetrics]
    overall_acc: float
    overall_f1: float
    confusion: list[list[int]]
    tool_usage: dict
    entries: list[EntryResult]
    failures: dict[str, int]
    acc_mode: str = "one_vs_rest"

    @property
    def n_evaluated(self) -> int:
        return int(np.sum(self.confusion))

    def to_json(self) -> dict:
        return {
            "acc_definition": ("per-class acc is one-vs-rest binary accuracy" if self.acc_mode == "one_vs_rest"
                               else "per-class acc is within-class accuracy (recall)"),
            "classes": list(CLASS_LABELS),
            "per_class": {k: asdict(v) for k, v in self.per_class.items()},
            "overall": {"acc": self.overall_acc, "f1": self.overall_f1},
            "confusion": {"rows": list(CLASS_LABELS), "columns": list(PRED_COLUMNS), "matrix": self.confusion},
            "n_evaluated": self.n_evaluated,
            "failures": self.failures,
            "tool_usage": self.tool_usage,
            "entries": [asdict(e) for e in self.entries],
        }

    def csv_row(self) -> dict:
        row = {}
        for label in CLASS_LABELS:
            for k, v in asdict(self.per_class[label]).items():
                row[f"{label}_{k}"] = v
        row["overall_acc"] = self.overall_acc
        row["overall_f1"] = self.overall_f1
        return row

    def to_csv(self, method: str = "agent") -> str:
        row = {"method": method, **{k: f"{v:.4f}" for k, v in self.csv_row().items()}}
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(row), lineterminator="\n")
        writer.writeheader()
        writer.writerow(row)
        return buf.getvalue()

    def write(self, out_dir, method: str = "agent") -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        jpath, cpath = out / "report.json", out / "metrics.csv"
        jpath.write_text(json.dumps(self.to_json(), indent=2) + "\n", encoding="utf-8")
        cpath.write_text(self.to_csv(method), encoding="utf-8")
        return jpath, cpath


PolicySource = Union[Policy, Callable[[ManifestEntry], Policy]]


def _policy_for(source: PolicySource, entry: ManifestEntry) -> Policy:
    return source if hasattr(source, "next_turn") else source(entry)


def _safe_dirname(entry_id: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in entry_id) or "entry"


def run_entry(entry: ManifestEntry, policy: PolicySource, config: SessionConfig,
              reward_config: RewardConfig | None, out_dir: Path | None) -> tuple[EntryResult, Trajectory | None]:
    try:
        image = read_image(entry.path)
    except IFDError as exc:
        return EntryResult(entry.id, entry.label, error=f"decode: {exc}"), None
    rel = None
    cfg = config
    if out_dir is not None:
        rel = Path("trajectories") / _safe_dirname(entry.id)
        cfg = replace(config, out_dir=out_dir / rel)
    traj = run_session([image], _policy_for(policy, entry), cfg)
    reward = score(traj, entry.gold, reward_config).as_dict() if reward_config is not None else None
    return EntryResult(
        entry.id, entry.label, predicted=traj.final.label if traj.final else None,
        termination=traj.termination, n_calls=len(traj.calls),
        trajectory_path=str(rel / "trajectory.traj.jsonl") if rel else None, reward=reward,
    ), traj


def evaluate(manifest: Sequence[ManifestEntry], policy: PolicySource, session_config: SessionConfig | None = None,
             reward_config: RewardConfig | None = None, workers: int = 1, out_dir=None,
             acc_mode: str = "one_vs_rest") -> EvalReport:
    """Run one session per entry and aggregate. Results keep manifest order for any worker count."""
    config = session_config or SessionConfig()
    out = Path(out_dir) if out_dir is not None else None
    if workers < 1:
        raise ValueError("workers must be >= 1")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda e: run_entry(e, policy, config, reward_config, out), manifest))

    entries = [r for r, _ in results]
    ok = [(r, t) for r, t in results if t is not None]
    failures = {label: 0 for label in CLASS_LABELS}
    for r in entries:
        if r.error is not None:
            failures[r.label] += 1
            log.warning("entry %s excluded from metrics: %s", r.id, r.error)
    matrix = confusion_matrix([r.label for r, _ in ok], [r.predicted for r, _ in ok])
    per, acc, macro = overall_metrics(matrix, acc_mode)
    usage = tool_usage_stats([t for _, t in ok], [r.label for r, _ in ok], config.budget)
    report = EvalReport(per, acc, macro, matrix.tolist(), usage, entries, failures, acc_mode)
    if out is not None:
        report.write(out)
    return report
