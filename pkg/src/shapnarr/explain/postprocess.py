"""Mechanical cleanup of generated text."""

from __future__ import annotations

import re

_SENTENCE_GAP = re.compile(r"(?<=[.!?])(\s+)")
_BLANK_RUN = re.compile(r"\s*\n\s*\n\s*")


def split_sentences(text: str) -> list[str]:
    """Sentences end in ``.``, ``!`` or ``?`` followed by whitespace (so ``3.5`` stays whole)."""
    return [s for s in _SENTENCE_GAP.split(text)[::2] if s]


def _strip_echo(text: str, prompt: str | None) -> str:
    echo = (prompt or "").strip()
    while echo and text.startswith(echo):
        text = text[len(echo) :].strip()
    return text


def _dedupe(text: str) -> str:
    parts = _SENTENCE_GAP.split(text)
    out = [parts[0]]
    last = parts[0]
    for i in range(1, len(parts), 2):
        gap, sentence = parts[i], parts[i + 1]
        if sentence == last:
            continue
        out += [gap, sentence]
        last = sentence
    return "".join(out)


def _truncate(text: str, max_chars: int) -> str:
    if len(text) <= max_chars:
        return text
    if max_chars <= 0:
        return ""
    parts = _SENTENCE_GAP.split(text)
    best, pos = "", 0
    for i in range(0, len(parts), 2):
        pos += len(parts[i])
        if pos > max_chars:
            break
        if parts[i][-1:] in (".", "!", "?"):
            best = text[:pos]
        if i + 1 < len(parts):
            pos += len(parts[i + 1])
    if best:
        return best
    # no complete sentence fits: cut at the last word boundary instead
    head = text[:max_chars]
    cut = max(head.rfind(" "), head.rfind("\n"))
    return (head[:cut] if cut > 0 else head).rstrip()


def _pass(text: str, max_chars: int, prompt: str | None) -> str:
    text = _strip_echo(text.strip(), prompt)
    text = _BLANK_RUN.sub("\n\n", text)
    text = _dedupe(text)
    return _truncate(text, max_chars).strip()


def post_process(raw: str, max_chars: int = 1200, prompt: str | None = None) -> str:
    """Strip whitespace and any echoed prompt, collapse blank-line runs, drop
    consecutive duplicate sentences, and cut at the last sentence boundary
    within ``max_chars``.

    Every step only ever shortens the text, so the pass is repeated until
    nothing changes; the result is therefore idempotent.
    """
    text = raw
    while True:
        cleaned = _pass(text, max_chars, prompt)
        if cleaned == text:
            return cleaned
        text = cleaned
