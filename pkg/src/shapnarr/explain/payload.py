"""Feature/value/attribution tuples ordered by importance."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from ..errors import ExplanationError
from ..model import FeatureVector
from ..shapley import ShapResult


def format_value(value: float | None) -> str:
    """Stable rendering of a feature value: integers bare, others to at most 4 decimals."""
    if value is None or value != value:
        return "missing"
    if float(value).is_integer():
        return str(int(value))
    text = f"{value:.4f}".rstrip("0").rstrip(".")
    return "0" if text == "-0" else text


@dataclass(frozen=True)
class AttributionEntry:
    feature: str
    value: float | None
    phi: float
    index: int
    display_value: str

    def to_dict(self) -> dict:
        return {"feature": self.feature, "value": self.value, "phi": self.phi}


@dataclass(frozen=True)
class AttributionPayload:
    entries: tuple[AttributionEntry, ...]
    base_value: float
    predicted_margin: float
    predicted_probability: float | None = None
    prediction_label: str | None = None

    def top(self, k: int) -> tuple[AttributionEntry, ...]:
        return self.entries[: max(0, k)]


def build_attribution_payload(
    shap: ShapResult,
    feature_names: Sequence[str],
    x: FeatureVector,
    probability: float | None = None,
    label: str | None = None,
    value_labels: Mapping[str, Mapping[float, str]] | None = None,
) -> AttributionPayload:
    """Zip names, values and attributions; sort by |phi| descending, ties by feature index.

    ``value_labels`` optionally maps a feature name to ``{code: label}`` so
    that categorical codes are displayed by name (e.g. ``0 -> "female"``).
    """
    if not (len(shap.phi) == len(feature_names) == len(x)):
        raise ExplanationError(
            f"length mismatch: {len(shap.phi)} attributions, {len(feature_names)} names, {len(x)} values"
        )
    value_labels = value_labels or {}
    entries = []
    for i, (name, value, phi) in enumerate(zip(feature_names, x, shap.phi)):
        display = format_value(value)
        if value is not None and name in value_labels and value in value_labels[name]:
            display = value_labels[name][value]
        entries.append(AttributionEntry(name, value, float(phi), i, display))
    entries.sort(key=lambda e: (-abs(e.phi), e.index))
    return AttributionPayload(
        entries=tuple(entries),
        base_value=shap.base_value,
        predicted_margin=shap.predicted_margin,
        predicted_probability=probability,
        prediction_label=label,
    )
