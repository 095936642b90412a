"""Attributions in, verified plain-language explanation out."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import EmptyGenerationError
from .backends import GenerationBackend, GenerationParams, generate
from .payload import AttributionPayload
from .postprocess import post_process
from .prompt import PromptTemplate, render_prompt
from .verify import VerificationReport, verify_explanation


@dataclass(frozen=True)
class ExplanationResult:
    prompt: str
    raw_text: str
    final_text: str
    backend_id: str
    params: GenerationParams
    verification: VerificationReport


def explain(
    payload: AttributionPayload,
    backend: GenerationBackend,
    params: GenerationParams | None = None,
    template: PromptTemplate | None = None,
    top_k: int = 5,
    max_chars: int = 1200,
) -> ExplanationResult:
    params = params or GenerationParams()
    prompt = render_prompt(payload, template, top_k)
    raw = generate(backend, prompt, params)
    final = post_process(raw, max_chars=max_chars, prompt=prompt)
    if not final:
        raise EmptyGenerationError(f"{backend.backend_id} output was empty after post-processing")
    return ExplanationResult(
        prompt=prompt,
        raw_text=raw,
        final_text=final,
        backend_id=backend.backend_id,
        params=params,
        verification=verify_explanation(payload, final, top_k),
    )
