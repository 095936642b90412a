"""Text generation backends.

A backend is anything with a ``backend_id`` string and a
``complete(prompt, params, timeout) -> str`` method. Two ship here: an
HTTP client for OpenAI-compatible ``/v1/completions`` servers (e.g. a locally
served Mistral 7B) and a deterministic template backend that needs no model.
"""

from __future__ import annotations

import logging
import os
import time
from dataclasses import asdict, dataclass
from typing import Callable, Protocol

import requests

from ..errors import BackendError, BackendUnavailableError, EmptyGenerationError, ProtocolError
from .payload import AttributionPayload

log = logging.getLogger(__name__)

URL_ENV = "SHAPNARR_LLM_URL"
TOKEN_ENV = "SHAPNARR_LLM_TOKEN"


@dataclass(frozen=True)
class GenerationParams:
    temperature: float = 0.2
    max_tokens: int = 256
    model_name: str = "mistral-7b-instruct"
    timeout: float = 30.0
    retries: int = 2

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise BackendError(f"temperature {self.temperature} outside [0, 2]")
        if isinstance(self.max_tokens, bool) or not isinstance(self.max_tokens, int) or self.max_tokens < 1:
            raise BackendError(f"max_tokens must be a positive integer, got {self.max_tokens!r}")
        if not self.timeout > 0:
            raise BackendError(f"timeout must be positive, got {self.timeout}")
        if isinstance(self.retries, bool) or not isinstance(self.retries, int) or self.retries < 0:
            raise BackendError(f"retries must be a non-negative integer, got {self.retries!r}")

    def to_dict(self) -> dict:
        return asdict(self)


class GenerationBackend(Protocol):
    backend_id: str
    max_tokens_limit: int | None

    def complete(self, prompt: str, params: GenerationParams, timeout: float) -> str: ...


class HttpBackend:
    """Client for ``POST {base_url}/v1/completions``.

    ``base_url`` falls back to ``$SHAPNARR_LLM_URL``; a bearer token is sent
    when ``token`` or ``$SHAPNARR_LLM_TOKEN`` is set.
    """

    def __init__(
        self,
        base_url: str | None = None,
        token: str | None = None,
        max_tokens_limit: int | None = None,
        session: requests.Session | None = None,
    ):
        base_url = base_url or os.environ.get(URL_ENV)
        if not base_url:
            raise BackendError(f"no LLM URL given; pass one or set {URL_ENV}")
        self.base_url = base_url.rstrip("/")
        self.token = token if token is not None else os.environ.get(TOKEN_ENV)
        self.max_tokens_limit = max_tokens_limit
        self.session = session or requests.Session()
        self.backend_id = f"http:{self.base_url}"

    def complete(self, prompt: str, params: GenerationParams, timeout: float) -> str:
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        body = {
            "model": params.model_name,
            "prompt": prompt,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        }
        try:
            resp = self.session.post(
                f"{self.base_url}/v1/completions", json=body, headers=headers, timeout=timeout
            )
        except (requests.ConnectionError, requests.Timeout) as exc:
            raise BackendUnavailableError(f"request to {self.base_url} failed: {exc}") from exc

        if not 200 <= resp.status_code < 300:
            raise ProtocolError("completion request rejected", resp.status_code, resp.text)
        try:
            return resp.json()["choices"][0]["text"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProtocolError("response lacks choices[0].text", resp.status_code, resp.text) from exc


def _direction(phi: float) -> str:
    if phi > 0:
        return f"increases the predicted score by {abs(phi):.3f}"
    if phi < 0:
        return f"decreases the predicted score by {abs(phi):.3f}"
    return "has no effect on the predicted score"


def template_backend_generate(payload: AttributionPayload, top_k: int = 5) -> str:
    """Deterministic stand-in for an LLM: one summary sentence, then one per top feature."""
    if payload.prediction_label is not None and payload.predicted_probability is not None:
        summary = (
            f"The model predicts {payload.prediction_label} with probability "
            f"{payload.predicted_probability:.3f} (score {payload.predicted_margin:.3f}, "
            f"baseline {payload.base_value:.3f})."
        )
    elif payload.predicted_probability is not None:
        summary = (
            f"The model gives a probability of {payload.predicted_probability:.3f} "
            f"(score {payload.predicted_margin:.3f}, baseline {payload.base_value:.3f})."
        )
    else:
        summary = (
            f"The model gives a score of {payload.predicted_margin:.3f} "
            f"against a baseline of {payload.base_value:.3f}."
        )
    sentences = [summary]
    for e in payload.top(top_k):
        sentences.append(f"{e.feature} = {e.display_value}, which {_direction(e.phi)}.")
    return " ".join(sentences)


class TemplateBackend:
    """Backend bound to one payload; ignores the prompt text."""

    backend_id = "template"
    max_tokens_limit = None

    def __init__(self, payload: AttributionPayload, top_k: int = 5):
        self.payload = payload
        self.top_k = top_k

    def complete(self, prompt: str, params: GenerationParams, timeout: float) -> str:
        return template_backend_generate(self.payload, self.top_k)


def _retryable(exc: BackendError) -> bool:
    if isinstance(exc, BackendUnavailableError):
        return True
    return isinstance(exc, ProtocolError) and exc.status is not None and (exc.status >= 500 or exc.status == 429)


def generate(
    backend: GenerationBackend,
    prompt: str,
    params: GenerationParams | None = None,
    backoff: float = 0.5,
    sleep: Callable[[float], None] = time.sleep,
    clock: Callable[[], float] = time.monotonic,
) -> str:
    """Ask ``backend`` for a completion, retrying transient failures.

    Connection errors, timeouts, 5xx and 429 are retried up to
    ``params.retries`` times with exponential backoff. All attempts and
    sleeps share one deadline of ``(retries + 1) * timeout``.

    Raises:
        BackendUnavailableError: network failure or timeout on the last attempt.
        ProtocolError: non-success status (carries status and a body excerpt).
        EmptyGenerationError: the backend returned only whitespace.
    """
    params = params or GenerationParams()
    limit = getattr(backend, "max_tokens_limit", None)
    if limit is not None and params.max_tokens > limit:
        raise BackendError(f"max_tokens {params.max_tokens} exceeds backend limit {limit}")

    deadline = clock() + (params.retries + 1) * params.timeout
    last: BackendError | None = None
    for attempt in range(params.retries + 1):
        remaining = deadline - clock()
        if remaining <= 0:
            break
        try:
            text = backend.complete(prompt, params, timeout=min(params.timeout, remaining))
        except BackendError as exc:
            if not _retryable(exc):
                raise
            last = exc
            log.warning("generation attempt %d/%d failed: %s", attempt + 1, params.retries + 1, exc)
            if attempt < params.retries:
                sleep(max(0.0, min(backoff * 2**attempt, deadline - clock())))
            continue
        if not isinstance(text, str) or not text.strip():
            raise EmptyGenerationError(f"{backend.backend_id} returned an empty completion")
        return text

    if isinstance(last, ProtocolError):
        raise last
    raise BackendUnavailableError(
        f"{backend.backend_id} unavailable after {params.retries + 1} attempts: {last}"
    ) from last
