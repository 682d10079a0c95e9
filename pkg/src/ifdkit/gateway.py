"""Policy backed by a remote chat-completions endpoint.

Requests are built deterministically from the transcript: the same transcript
and config always give the same body bytes. Images (clues and tool outputs)
are attached as base64 PNG data URLs, keeping only the most recent ones.
The API key is read from ``IFDKIT_API_KEY`` and never logged.
"""

from __future__ import annotations

import base64
import json
import logging
import os
import random
import threading
import time
from dataclasses import dataclass, field
from typing import Callable

import httpx
import numpy as np
from PIL import Image

from .errors import BackendError, RateLimitError, TransportError
from .protocol import ArtifactId, clue_name
from .raster import Raster, encode_png
from .toolbox import HeatMap

log = logging.getLogger(__name__)

API_KEY_ENV = "IFDKIT_API_KEY"
MAX_SIDE = 1024


@dataclass(frozen=True)
class GatewayConfig:
    base_url: str
    model_name: str
    api_key: str = field(default_factory=lambda: os.environ.get(API_KEY_ENV, ""), repr=False)
    timeout: float = 120.0
    max_retries: int = 3
    temperature: float = 0.0
    endpoint_path: str = "/chat/completions"
    max_images: int = 10
    max_concurrency: int = 4
    backoff_base: float = 0.5
    backoff_cap: float = 30.0

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.max_images < 0:
            raise ValueError("max_images must be >= 0")
        if self.max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")

    @property
    def url(self) -> str:
        return self.base_url.rstrip("/") + "/" + self.endpoint_path.lstrip("/")


def _image_label(aid: ArtifactId) -> str:
    return clue_name(aid.index) if aid.namespace == "clue" else str(aid)


def _as_raster(data) -> Raster:
    return data.to_raster() if isinstance(data, HeatMap) else data


def fit_for_upload(img: Raster, max_side: int = MAX_SIDE) -> tuple[Raster, bool]:
    """Downscale so the long side is at most ``max_side``; returns (image, resized)."""
    h, w = img.height, img.width
    if max(h, w) <= max_side:
        return img, False
    scale = max_side / max(h, w)
    size = (max(1, round(w * scale)), max(1, round(h * scale)))
    pil = Image.fromarray(img.to_uint8(), mode="L" if img.channels == 1 else "RGB")
    return Raster.from_uint8(np.asarray(pil.resize(size, Image.Resampling.LANCZOS))), True


def data_url(img: Raster) -> str:
    return "data:image/png;base64," + base64.b64encode(encode_png(img)).decode("ascii")


def build_request(config: GatewayConfig, view, note: Callable[[str], None] | None = None) -> dict:
    """Chat-completions body for the transcript; observation messages are sent as user turns."""
    refs = [aid for m in view.messages for aid in m.image_refs]
    keep = set(refs[len(refs) - config.max_images:]) if config.max_images else set()
    messages = []
    for m in view.messages:
        role = "user" if m.role == "observation" else m.role
        if role in ("system", "assistant"):
            messages.append({"role": role, "content": m.text})
            continue
        parts = [{"type": "text", "text": m.text}]
        for aid in m.image_refs:
            if aid not in keep:
                continue
            img, resized = fit_for_upload(_as_raster(view.resolve(aid)))
            if resized and note is not None:
                note(f"{aid} resized to {img.width}x{img.height} for upload")
            parts.append({"type": "text", "text": f"{_image_label(aid)}:"})
            parts.append({"type": "image_url", "image_url": {"url": data_url(img)}})
        messages.append({"role": "user", "content": parts})
    return {"model": config.model_name, "messages": messages, "temperature": config.temperature}


def encode_body(body: dict) -> bytes:
    return json.dumps(body, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def extract_text(payload) -> str:
    try:
        content = payload["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        raise BackendError("response has no choices[0].message.content") from None
    if isinstance(content, list):
        content = "".join(p.get("text", "") for p in content if isinstance(p, dict))
    if not isinstance(content, str):
        raise BackendError("response content is not text")
    return content


class Gateway:
    """Thread-safe client; at most ``max_concurrency`` requests are in flight at once."""

    def __init__(self, config: GatewayConfig, client: httpx.Client | None = None,
                 sleep: Callable[[float], None] = time.sleep, rng: random.Random | None = None):
        self.config = config
        self.client = client or httpx.Client(timeout=config.timeout)
        self.sleep = sleep
        self.rng = rng or random.Random()
        self._slots = threading.BoundedSemaphore(config.max_concurrency)
        self._rng_lock = threading.Lock()

    def _scrub(self, text: str) -> str:
        key = self.config.api_key
        return text.replace(key, "***") if key else text

    def backoff(self, attempt: int) -> float:
        base = min(self.config.backoff_cap, self.config.backoff_base * 2 ** attempt)
        with self._rng_lock:
            return base + self.rng.uniform(0, self.config.backoff_base)

    def headers(self) -> dict[str, str]:
        h = {"Content-Type": "application/json"}
        if self.config.api_key:
            h["Authorization"] = f"Bearer {self.config.api_key}"
        return h

    def post(self, body: bytes) -> str:
        attempts = self.config.max_retries + 1
        last: Exception | None = None
        for attempt in range(attempts):
            if attempt:
                delay = self.backoff(attempt - 1)
                log.info("retrying chat request in %.2fs (attempt %d/%d): %s",
                         delay, attempt + 1, attempts, self._scrub(str(last)))
                self.sleep(delay)
            try:
                with self._slots:
                    resp = self.client.post(self.config.url, content=body, headers=self.headers(),
                                            timeout=self.config.timeout)
            except httpx.TransportError as exc:
                last = TransportError(self._scrub(f"{type(exc).__name__}: {exc}"))
                continue
            if resp.status_code == 429:
                last = RateLimitError("rate limited (HTTP 429)", status=429)
                continue
            if resp.status_code >= 500:
                last = BackendError(f"server error (HTTP {resp.status_code})", status=resp.status_code)
                continue
            if resp.status_code >= 400:
                detail = self._scrub(resp.text[:200])
                raise BackendError(f"request rejected (HTTP {resp.status_code}): {detail}", status=resp.status_code)
            try:
                payload = resp.json()
            except ValueError:
                raise BackendError("response is not JSON", status=resp.status_code) from None
            return extract_text(payload)
        assert last is not None
        if isinstance(last, BackendError):
            raise type(last)(f"{last} after {attempts} attempts", status=last.status)
        raise TransportError(f"{last} after {attempts} attempts")

    def complete_turn(self, view) -> str:
        if not view.messages:
            raise ValueError("transcript is empty")
        note = getattr(view, "note", None)
        return self.post(encode_body(build_request(self.config, view, note)))

    def close(self) -> None:
        self.client.close()


class LLMPolicy:
    def __init__(self, gateway: Gateway):
        self.gateway = gateway

    def next_turn(self, view) -> str:
        return self.gateway.complete_turn(view)
