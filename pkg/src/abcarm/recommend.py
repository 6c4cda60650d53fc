"""Gesture recommendation from a single captured image.

One request = one image, one freshly built prompt over the user's recorded
action names, one independent backend conversation. The backend's reply is
validated down to 2-3 names that exactly match the library; anything else
(including 'init', duplicates, or near-misses) never reaches the caller.
Image bytes live only in memory for the duration of the call and are never
written to durable storage.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import time
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import httpx

from .errors import (
    BackendTimeout,
    BackendUnavailable,
    EmptyActionList,
    NoValidActions,
    ParseFailed,
)
from .memory import HOME_ACTION

API_KEY_ENV = "ABC_LLM_API_KEY"
DEFAULT_TIMEOUT_S = 15.0
MAX_SUGGESTIONS = 3
MIN_SUGGESTIONS = 2

PROMPT_TEMPLATE = (
    "The image depicts a scene where the user is facing the person they wish to "
    "interact with. Refer to the following action list: {recorded_actions}, as "
    "well as the scene information and the actions of the person in the image. "
    "Determine which actions the user is most likely to respond to and order "
    "them by likelihood. Return only the action names that exactly match those "
    "in the original action list {recorded_actions}, separated by commas, "
    "excluding 'init'. Suggest 2~3 suitable actions."
)


def build_prompt(action_names: Sequence[str]) -> str:
    """Render the recommendation prompt over the serialized action list.

    Both placeholder occurrences get the same comma-separated list in the
    caller's order; 'init' is passed through because the prompt text itself
    instructs the model to exclude it.
    """
    if not action_names:
        raise EmptyActionList("at least one action name is required")
    serialized = ", ".join(action_names)
    return PROMPT_TEMPLATE.replace("{recorded_actions}", serialized)


def parse_response(text: str, library_names: Sequence[str]) -> list[str]:
    """Validate a backend reply into an ordered list of 2-3 action names.

    Splits on commas, trims surrounding whitespace, keeps only tokens that
    exactly (case-sensitively) match a library name, drops 'init' and
    duplicates, and caps the result at three. Raises NoValidActions when
    fewer than two tokens survive.
    """
    names = set(library_names)
    out: list[str] = []
    for token in text.split(","):
        token = token.strip()
        if token in names and token != HOME_ACTION and token not in out:
            out.append(token)
            if len(out) == MAX_SUGGESTIONS:
                break
    if len(out) < MIN_SUGGESTIONS:
        raise NoValidActions(
            f"only {len(out)} valid action name(s) in backend reply {text!r}"
        )
    return out


@dataclass(frozen=True)
class RecommendationRequest:
    """One captured image plus the full library name list (including 'init')."""

    image: bytes
    action_names: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.image:
            raise ValueError("image must not be empty")
        non_init = [n for n in self.action_names if n != HOME_ACTION]
        if len(non_init) < MIN_SUGGESTIONS:
            raise ValueError("need at least two non-'init' actions to recommend from")


@dataclass(frozen=True)
class RecommendationResult:
    suggestions: tuple[str, ...]
    latency_s: float
    backend_id: str


class VisionBackend(Protocol):
    backend_id: str

    def complete(self, prompt: str, image: bytes) -> str:
        """Run one fresh image+prompt conversation and return the raw reply."""
        ...


class MockVisionBackend:
    """Deterministic backend keyed on the SHA-256 digest of the exact bytes.

    Every call is logged with a fresh conversation id so tests can assert
    that consecutive requests share no dialogue state.
    """

    backend_id = "mock"

    def __init__(self, mapping: dict[str, str]):
        self.mapping = dict(mapping)
        self.calls: list[dict] = []

    @classmethod
    def from_file(cls, path: str | Path) -> "MockVisionBackend":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(doc, dict):
            raise ValueError(f"mock mapping {path} must be a JSON object")
        return cls({str(k): str(v) for k, v in doc.items()})

    @staticmethod
    def digest(image: bytes) -> str:
        return hashlib.sha256(image).hexdigest()

    def complete(self, prompt: str, image: bytes) -> str:
        digest = self.digest(image)
        self.calls.append({
            "conversation_id": uuid.uuid4().hex,
            "digest": digest,
            "prompt": prompt,
        })
        try:
            return self.mapping[digest]
        except KeyError:
            raise BackendUnavailable(f"mock has no response for image digest {digest[:12]}…")


class LiveVisionBackend:
    """HTTPS vision-chat backend (OpenAI-compatible chat completions).

    The API key comes from the ABC_LLM_API_KEY environment variable only;
    endpoint and model identifier are configuration. Each call posts a
    single-message conversation, so there is no context carryover.
    """

    def __init__(
        self,
        endpoint: str = "https://api.openai.com/v1",
        model: str = "gpt-4o-2024-05-13",
        timeout_s: float = DEFAULT_TIMEOUT_S,
        temperature: float = 0.0,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.timeout_s = timeout_s
        self.temperature = temperature
        self.backend_id = model

    def complete(self, prompt: str, image: bytes) -> str:
        api_key = os.environ.get(API_KEY_ENV)
        if not api_key:
            raise BackendUnavailable(f"{API_KEY_ENV} is not set")
        mime = "image/png" if image[:8] == b"\x89PNG\r\n\x1a\n" else "image/jpeg"
        payload = {
            "model": self.model,
            "temperature": self.temperature,
            "messages": [
                {
                    "role": "user",
                    "content": [
                        {"type": "text", "text": prompt},
                        {
                            "type": "image_url",
                            "image_url": {
                                "url": f"data:{mime};base64,"
                                       f"{base64.b64encode(image).decode('ascii')}"
                            },
                        },
                    ],
                }
            ],
        }
        try:
            response = httpx.post(
                f"{self.endpoint}/chat/completions",
                json=payload,
                headers={"Authorization": f"Bearer {api_key}"},
                timeout=self.timeout_s,
            )
            response.raise_for_status()
            doc = response.json()
            return doc["choices"][0]["message"]["content"]
        except httpx.TimeoutException as exc:
            raise BackendTimeout(f"backend did not answer within {self.timeout_s}s") from exc
        except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
            raise BackendUnavailable(f"backend call failed: {exc}") from exc


def request_recommendation(
    backend: VisionBackend, request: RecommendationRequest
) -> RecommendationResult:
    """Submit one image and return validated suggestions with latency.

    Latency covers request through successful parse. A reply that fails
    validation is retried once with the identical prompt (a second fresh
    conversation); a second failure raises ParseFailed. Backend transport
    errors propagate immediately without retry.
    """
    prompt = build_prompt(request.action_names)
    start = time.perf_counter()
    last_error: NoValidActions | None = None
    for _ in range(2):  # initial attempt + one parse-failure retry
        text = backend.complete(prompt, request.image)
        try:
            suggestions = parse_response(text, request.action_names)
        except NoValidActions as exc:
            last_error = exc
            continue
        return RecommendationResult(
            suggestions=tuple(suggestions),
            latency_s=time.perf_counter() - start,
            backend_id=backend.backend_id,
        )
    raise ParseFailed(f"backend reply failed validation twice: {last_error}")
