"""Model client: one boundary for every model call in the pipeline.

Three modes.  Live posts a chat-completion request to an HTTP endpoint.
Record does the same but persists every exchange into a content-addressed
fixture store.  Replay serves exchanges from that store and never touches
the network, which is what makes the model-dependent stages deterministic
and testable offline.

Fixture key = SHA-256 over the prompt text followed by the hex digest of
each attached image, so a fixture hit is exact on content.  Fixture files
hold the prompt and image hashes plus the reply; credentials never appear
in them.  COMUI_API_KEY / COMUI_API_BASE / COMUI_MODEL are read here and
nowhere else, at call time, so constructing a Replay client needs no
environment at all.
"""

from __future__ import annotations

import base64
import hashlib
import io
import json
import os
import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from PIL import Image

from .errors import ClientError, ReplayMissError

ENV_API_KEY = "COMUI_API_KEY"
ENV_API_BASE = "COMUI_API_BASE"
ENV_MODEL = "COMUI_MODEL"

DEFAULT_API_BASE = "https://api.openai.com/v1"
DEFAULT_MODEL = "gpt-4o"

# transport: (url, headers, payload, timeout) -> parsed JSON reply body.
# Transient failures must surface as OSError (requests exceptions are).
Transport = Callable[[str, dict, dict, float], dict]


class ClientMode(str, Enum):
    LIVE = "live"
    REPLAY = "replay"
    RECORD = "record"


def png_bytes(image) -> bytes:
    """Deterministic PNG encoding of an RGB(A)/gray uint8 array."""
    arr = np.asarray(image)
    if arr.dtype != np.uint8:
        arr = np.clip(np.round(arr), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def image_hash(png: bytes) -> str:
    return hashlib.sha256(png).hexdigest()


def request_key(prompt: str, image_hashes: Sequence[str]) -> str:
    """Content address of one exchange: prompt bytes, then each image hash."""
    h = hashlib.sha256()
    h.update(prompt.encode("utf-8"))
    for ih in image_hashes:
        h.update(ih.encode("ascii"))
    return h.hexdigest()


def _http_transport(url: str, headers: dict, payload: dict, timeout: float) -> dict:
    import requests

    resp = requests.post(url, headers=headers, json=payload, timeout=timeout)
    resp.raise_for_status()
    return resp.json()


def _extract_reply(data: dict) -> str:
    """Pull the assistant text out of a chat-completion response body."""
    try:
        content = data["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise ClientError(f"malformed completion envelope: {exc!r}") from exc
    if isinstance(content, str):
        return content
    if isinstance(content, list):
        parts = [p.get("text", "") for p in content if isinstance(p, dict) and p.get("type") == "text"]
        return "".join(parts)
    raise ClientError(f"unsupported content payload of type {type(content).__name__}")


@dataclass
class ModelClient:
    """See module docstring.  `transport` is injectable for tests and for
    scripted recording; the default posts via requests."""

    mode: ClientMode = ClientMode.REPLAY
    fixtures_dir: Path | str = "fixtures"
    transport: Transport | None = None
    timeout: float = 60.0
    retries: int = 3
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self) -> None:
        self.mode = ClientMode(self.mode)
        self.fixtures_dir = Path(self.fixtures_dir)
        if self.retries < 1:
            raise ClientError("retries must be at least 1")

    # -- public entry point ------------------------------------------------

    def call(self, prompt: str, images: Sequence = ()) -> str:
        pngs = [png_bytes(im) for im in images]
        hashes = [image_hash(p) for p in pngs]
        key = request_key(prompt, hashes)
        if self.mode is ClientMode.REPLAY:
            return self._replay(key, prompt)
        reply = self._live_call(prompt, pngs)
        if self.mode is ClientMode.RECORD:
            self._persist(key, prompt, hashes, reply)
        return reply

    def key_for(self, prompt: str, images: Sequence = ()) -> str:
        """The fixture key a call with these arguments would use."""
        return request_key(prompt, [image_hash(png_bytes(im)) for im in images])

    # -- replay ------------------------------------------------------------

    def _fixture_path(self, key: str) -> Path:
        return self.fixtures_dir / f"{key}.json"

    def _replay(self, key: str, prompt: str) -> str:
        path = self._fixture_path(key)
        if not path.exists():
            err = ReplayMissError(f"replay miss: no fixture for request {key}")
            err.key = key
            raise err
        try:
            record = json.loads(path.read_text(encoding="utf-8"))
            stored_prompt = record["request"]["prompt"]
            reply = record["reply"]
        except (ValueError, KeyError, TypeError) as exc:
            raise ClientError(f"fixture {key} is unreadable: {exc!r}") from exc
        if stored_prompt != prompt:
            raise ClientError(f"fixture store corrupt: {key} holds a different request")
        return reply

    def _persist(self, key: str, prompt: str, hashes: list[str], reply: str) -> None:
        record = {
            "request": {"prompt": prompt, "image_hashes": hashes},
            "reply": reply,
        }
        text = json.dumps(record, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
        with self._lock:
            self.fixtures_dir.mkdir(parents=True, exist_ok=True)
            tmp = self._fixture_path(key).with_suffix(".json.tmp")
            tmp.write_text(text, encoding="utf-8")
            os.replace(tmp, self._fixture_path(key))

    # -- live --------------------------------------------------------------

    def _live_call(self, prompt: str, pngs: list[bytes]) -> str:
        key = os.environ.get(ENV_API_KEY)
        if not key:
            raise ClientError(f"{ENV_API_KEY} is not set; refusing to contact the endpoint")
        base = os.environ.get(ENV_API_BASE, DEFAULT_API_BASE)
        model = os.environ.get(ENV_MODEL, DEFAULT_MODEL)
        url = base.rstrip("/") + "/chat/completions"
        headers = {"Authorization": f"Bearer {key}"}
        content: list[dict] = [{"type": "text", "text": prompt}]
        for png in pngs:
            content.append({"type": "image", "image": base64.b64encode(png).decode("ascii")})
        payload = {"model": model, "messages": [{"role": "user", "content": content}]}
        transport = self.transport or _http_transport
        last: OSError | None = None
        for _ in range(self.retries):
            try:
                data = transport(url, headers, payload, self.timeout)
            except OSError as exc:
                last = exc
                continue
            return _extract_reply(data)
        raise ClientError(f"transport failed after {self.retries} attempts: {last!r}") from last
