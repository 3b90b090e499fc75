"""Deterministic text normalization used before any word-level comparison.

Rules, applied in order:

1. Unicode compatibility decomposition, then combining marks stripped
   ("Jokić" -> "Jokic"); remaining non-ASCII characters act as word
   boundaries.
2. Apostrophes (straight and typographic) are deleted so contractions
   collapse ("it's" -> "its").
3. Hyphens are deleted, joining the halves ("one-point" -> "onepoint").
4. Every other character outside [a-z0-9] becomes a word boundary.
5. Lowercase; whitespace collapsed.

Digit runs are kept verbatim as tokens; there is no digit/word conversion.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field

# Straight/typographic apostrophes and close cousins; all deleted outright.
_APOSTROPHES = "'‘’ʼʻ`´"
# Characters that join the surrounding halves when removed.
_JOINERS = "-­"

_TOKEN_RE = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class NormalizedText:
    """A normalized word sequence plus the string it came from."""

    words: tuple[str, ...]
    original: str = field(compare=False, default="")

    @property
    def joined(self) -> str:
        return " ".join(self.words)

    def __len__(self) -> int:
        return len(self.words)

    def __iter__(self):
        return iter(self.words)


def _fold_to_ascii(text: str) -> str:
    decomposed = unicodedata.normalize("NFKD", text)
    return "".join(ch for ch in decomposed if not unicodedata.combining(ch))


def normalize(text: str) -> NormalizedText:
    """Normalize arbitrary text into lowercase [a-z0-9]+ word tokens."""
    folded = _fold_to_ascii(text)
    for ch in _APOSTROPHES:
        folded = folded.replace(ch, "")
    for ch in _JOINERS:
        folded = folded.replace(ch, "")
    words = tuple(_TOKEN_RE.findall(folded.lower()))
    return NormalizedText(words=words, original=text)


def tokenize_words(normalized: NormalizedText) -> list[str]:
    """Word sequence of a normalized text; its length is the WER denominator."""
    return list(normalized.words)
