"""Prompt templates and rendering."""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from ..errors import TemplateError
from .payload import AttributionEntry, AttributionPayload

PLACEHOLDERS = ("task_instruction", "prediction_summary", "feature_lines", "style_instruction")
_PLACEHOLDER = re.compile(r"\{(" + "|".join(PLACEHOLDERS) + r")\}")

DEFAULT_TASK_INSTRUCTION = (
    "Please explain the importance of the following features in determining the model's prediction."
)
DEFAULT_STYLE_INSTRUCTION = (
    "Write one short paragraph in plain language. Mention each listed feature by name and say "
    "whether it raised or lowered the prediction. Do not invent features or numbers."
)


@dataclass(frozen=True)
class PromptTemplate:
    text: str
    task_instruction: str = DEFAULT_TASK_INSTRUCTION
    style_instruction: str = DEFAULT_STYLE_INSTRUCTION

    def __post_init__(self):
        for name in PLACEHOLDERS:
            count = self.text.count("{" + name + "}")
            if count != 1:
                raise TemplateError(f"template must contain {{{name}}} exactly once, found {count}")


def load_template(path: str | Path, **kwargs) -> PromptTemplate:
    return PromptTemplate(Path(path).read_text(encoding="utf-8"), **kwargs)


def default_template() -> PromptTemplate:
    text = resources.files("shapnarr.fixtures").joinpath("default_prompt.txt").read_text(encoding="utf-8")
    return PromptTemplate(text)


def format_phi(phi: float) -> str:
    text = f"{phi:+.4f}"
    return "+0.0000" if text == "-0.0000" else text


def feature_line(entry: AttributionEntry) -> str:
    return f"{entry.feature} = {entry.display_value} (SHAP: {format_phi(entry.phi)})"


def prediction_summary(payload: AttributionPayload) -> str:
    lines = []
    if payload.prediction_label is not None:
        lines.append(f"Predicted outcome: {payload.prediction_label}")
    if payload.predicted_probability is not None:
        lines.append(f"Predicted probability: {payload.predicted_probability:.4f}")
    lines.append(f"Model score (margin): {payload.predicted_margin:.4f}")
    lines.append(f"Baseline score before any feature is considered: {payload.base_value:.4f}")
    return "\n".join(lines)


def render_prompt(payload: AttributionPayload, template: PromptTemplate | None = None, top_k: int = 5) -> str:
    """Fill the template with the top ``top_k`` attributions. Deterministic."""
    if top_k < 1:
        raise TemplateError("top_k must be at least 1")
    template = template or default_template()
    values = {
        "task_instruction": template.task_instruction,
        "prediction_summary": prediction_summary(payload),
        "feature_lines": "\n".join(feature_line(e) for e in payload.top(top_k)),
        "style_instruction": template.style_instruction,
    }
    # single pass, so substituted text is never re-scanned for placeholders
    return _PLACEHOLDER.sub(lambda m: values[m.group(1)], template.text)
