"""Fixed tool registry: call names, parameter signatures and dispatch.

Tools register themselves with the :func:`tool` decorator. Dispatch never
raises on domain errors; they come back as ``status="failed"`` reports so a
session can keep going.
"""

from __future__ import annotations

import functools
import inspect
from dataclasses import dataclass
from typing import Callable

from ..errors import IFDError, ParameterError
from ..raster import Raster
from .report import ToolName, ToolReport


@dataclass(frozen=True)
class ToolSpec:
    name: ToolName
    call_name: str
    func: Callable[..., ToolReport]
    params: tuple[tuple[str, object], ...]  # (name, default) in positional order
    description: str

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(p for p, _ in self.params)

    def signature(self) -> str:
        parts = ["image"]
        for pname, default in self.params:
            parts.append(pname if default is inspect.Parameter.empty else f"{pname}={default!r}")
        return f"{self.call_name}({', '.join(parts)})"


REGISTRY: dict[str, ToolSpec] = {}
BY_NAME: dict[ToolName, ToolSpec] = {}


def tool(name: ToolName, call_name: str, description: str):
    def decorate(fn):
        sig = inspect.signature(fn)
        params = tuple((p.name, p.default) for p in list(sig.parameters.values())[1:])

        @functools.wraps(fn)
        def wrapper(img: Raster, **kwargs) -> ToolReport:
            bound = {p: d for p, d in params if d is not inspect.Parameter.empty}
            bound.update(kwargs)
            unknown = set(kwargs) - {p for p, _ in params}
            if unknown:
                return ToolReport.failed(name, bound, f"unknown parameter(s): {', '.join(sorted(unknown))}")
            missing = [p for p, d in params if d is inspect.Parameter.empty and p not in kwargs]
            if missing:
                return ToolReport.failed(name, bound, f"missing parameter(s): {', '.join(missing)}")
            try:
                return fn(img, **kwargs)
            except IFDError as exc:
                return ToolReport.failed(name, bound, str(exc))
            except (TypeError, ValueError) as exc:
                return ToolReport.failed(name, bound, f"invalid parameter: {exc}")

        spec = ToolSpec(name, call_name, wrapper, params, description)
        REGISTRY[call_name] = spec
        BY_NAME[name] = spec
        wrapper.spec = spec
        return wrapper

    return decorate


def run_tool(call_name: str, img: Raster, **params) -> ToolReport:
    try:
        spec = REGISTRY[call_name]
    except KeyError:
        raise ParameterError(f"unknown tool {call_name!r}; valid: {', '.join(sorted(REGISTRY))}") from None
    return spec.func(img, **params)


def check_positive_int(name: str, value, minimum: int = 1) -> int:
    if isinstance(value, bool) or int(value) != value or value < minimum:
        raise ParameterError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
