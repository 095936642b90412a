"""Mechanical faithfulness check of an explanation against its attributions.

For each of the top-k features: is it named in the text (case-insensitive
substring), and does the nearest direction word in the first sentence that
names it agree with the sign of its attribution? Negations ("does not
increase") are not interpreted.
"""

from __future__ import annotations

import re
from dataclasses import asdict, dataclass

from .payload import AttributionPayload
from .postprocess import split_sentences

UP_WORDS = re.compile(
    r"\b(increas(?:e|es|ed|ing)|rais(?:e|es|ed|ing)|higher|boost(?:s|ed|ing)?|improv(?:e|es|ed|ing))\b",
    re.IGNORECASE,
)
DOWN_WORDS = re.compile(
    r"\b(decreas(?:e|es|ed|ing)|reduc(?:e|es|ed|ing)|lower(?:s|ed|ing)?|hurt(?:s|ing)?)\b",
    re.IGNORECASE,
)

CONSISTENT = "consistent"
CONTRADICTED = "contradicted"
INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class VerificationReport:
    top_k: int
    features: tuple[str, ...]
    mentioned: tuple[bool, ...]
    directional_consistency: tuple[str, ...]
    coverage: float

    @property
    def contradictions(self) -> int:
        return self.directional_consistency.count(CONTRADICTED)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["contradictions"] = self.contradictions
        return d


def _sentence_direction(sentence: str, name: str) -> int:
    """+1 / -1 for the direction word closest to ``name``; 0 if none or a tie."""
    low = sentence.lower()
    spans = [(m.start(), m.start() + len(name)) for m in re.finditer(re.escape(name), low)]
    best, direction = None, 0
    for sign, pattern in ((1, UP_WORDS), (-1, DOWN_WORDS)):
        for m in pattern.finditer(sentence):
            dist = min(max(m.start() - end, start - m.end(), 0) for start, end in spans)
            if best is None or dist < best:
                best, direction = dist, sign
            elif dist == best and direction != sign:
                direction = 0
    return direction


def verify_explanation(payload: AttributionPayload, text: str, top_k: int = 5) -> VerificationReport:
    entries = payload.top(top_k)
    sentences = split_sentences(text)
    mentioned, consistency = [], []
    for e in entries:
        name = e.feature.lower()
        hits = [s for s in sentences if name and name in s.lower()]
        mentioned.append(bool(hits))
        status = INDETERMINATE
        if e.phi != 0:
            for s in hits:
                d = _sentence_direction(s, name)
                if UP_WORDS.search(s) or DOWN_WORDS.search(s):
                    if d != 0:
                        status = CONSISTENT if (d > 0) == (e.phi > 0) else CONTRADICTED
                    break
        consistency.append(status)
    k = len(entries)
    return VerificationReport(
        top_k=k,
        features=tuple(e.feature for e in entries),
        mentioned=tuple(mentioned),
        directional_consistency=tuple(consistency),
        coverage=sum(mentioned) / k if k else 1.0,
    )
