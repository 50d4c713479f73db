"""Text normalization applied before tokenization and before exact-match scoring."""
from __future__ import annotations

import re

# Keep letters, digits, and "?" (question mark carries meaning in QA text).
_STRIP = re.compile(r"[^a-z0-9? ]")
_SPACES = re.compile(r"\s+")


def normalize(text: str) -> str:
    """Lowercase, drop punctuation except '?', collapse runs of whitespace.

    '?' is split into its own token so questions tokenize uniformly
    whether or not the source text spaced it.
    """
    lowered = text.lower().replace("?", " ? ")
    lowered = _SPACES.sub(" ", lowered)
    cleaned = _STRIP.sub("", lowered)
    cleaned = _SPACES.sub(" ", cleaned).strip()
    return cleaned


def words(text: str) -> list[str]:
    """Normalized whitespace token list; [] for empty or punctuation-only text."""
    norm = normalize(text)
    return norm.split() if norm else []
