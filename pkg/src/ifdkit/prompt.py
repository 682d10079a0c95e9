"""System prompt template for tool-calling policies.

The wording is authored for this toolkit; it covers clue preloading, the
tool catalog, the call grammar, the tag contract and the class tokens.
"""

from __future__ import annotations

from typing import Iterable, Sequence

from .errors import ConfigError
from .protocol import CLASS_LABELS, clue_name
from .toolbox import REGISTRY, ToolSpec

SYSTEM_TEMPLATE = """\
You are an image forensics analyst. Decide whether the image under review is \
authentic, synthetic (fully generated) or tampered (locally edited), and justify \
the verdict with evidence from forensic tools.

Input images are preloaded and can be referenced by name:
{clue_inventory}

Act by writing tool calls instead of free-form speculation. Available tools \
(every tool takes an image reference first):
{tool_catalog}

Call grammar:
{grammar_spec}

Rules:
- Wrap every block of tool calls in <code>...</code>. Each call's textual findings \
and heatmaps are returned to you as an observation.
- You may use at most {budget} tool calls in total.
- When you are done, place the final class token inside <answer>...</answer>, \
using exactly one of: {labels}. For tampered images name the forged object after a \
colon, e.g. <answer>tampered: the red car</answer>.
- Give the answer only in your last turn and only once."""

GRAMMAR_SPEC = """\
  one call per line:  name = tool(image_ref, value, ..., key=value, ...)  or  tool(image_ref, ...)
  image_ref is image_clue_<n> or a name bound by an earlier call (bound to the call's first output)
  values are integers, decimals or quoted strings; # starts a comment"""

FORCED_ANSWER_PROMPT = (
    "The tool budget is exhausted or the turn limit is reached. Do not call any more tools. "
    "Give your final verdict now inside <answer>...</answer>."
)

DEFAULT_QUESTION = "Is this image authentic, synthetic, or tampered? Investigate with the tools before answering."


def clue_inventory(dims: Sequence[tuple[int, int]]) -> str:
    return "\n".join(f"{clue_name(i)}: {w}x{h}" for i, (w, h) in enumerate(dims))


def tool_catalog(specs: Iterable[ToolSpec]) -> str:
    return "\n".join(f"  {s.signature()}  # {s.description}" for s in specs)


def render_system_prompt(clues, registry: dict[str, ToolSpec] | None = None, budget: int = 7) -> str:
    """Render the system prompt for the given clues (rasters or (width, height) pairs)."""
    dims = [(c.width, c.height) if hasattr(c, "width") else (int(c[0]), int(c[1])) for c in clues]
    if not dims:
        raise ConfigError("at least one clue image is required")
    registry = REGISTRY if registry is None else registry
    return SYSTEM_TEMPLATE.format(
        clue_inventory=clue_inventory(dims),
        tool_catalog=tool_catalog(registry.values()),
        grammar_spec=GRAMMAR_SPEC,
        budget=budget,
        labels=", ".join(CLASS_LABELS),
    )
