from .backends import GenerationParams, HttpBackend, TemplateBackend, generate, template_backend_generate
from .payload import AttributionPayload, build_attribution_payload
from .pipeline import ExplanationResult, explain
from .postprocess import post_process
from .prompt import PromptTemplate, default_template, load_template, render_prompt
from .verify import VerificationReport, verify_explanation

__all__ = [
    "AttributionPayload",
    "ExplanationResult",
    "GenerationParams",
    "HttpBackend",
    "PromptTemplate",
    "TemplateBackend",
    "VerificationReport",
    "build_attribution_payload",
    "default_template",
    "explain",
    "generate",
    "load_template",
    "post_process",
    "render_prompt",
    "template_backend_generate",
    "verify_explanation",
]
