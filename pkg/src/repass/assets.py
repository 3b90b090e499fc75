"""Loaders for packaged data files (stopwords, background word frequencies)."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources
from pathlib import Path

from .errors import RepassError


def _read_asset(name: str) -> str:
    return resources.files("repass.assets").joinpath(name).read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def default_stopwords() -> frozenset[str]:
    words = set()
    for line in _read_asset("stopwords_en.txt").splitlines():
        word = line.split("#", 1)[0].strip().lower()
        if word:
            words.add(word)
    return frozenset(words)


def parse_frequency_table(text: str, source: str = "<string>") -> dict[str, int]:
    """Parse ``word count`` lines into a frequency mapping."""
    counts: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise RepassError(f"bad frequency line at {source}:{lineno}: {raw!r}")
        word, count = parts
        try:
            counts[word.lower()] = int(count)
        except ValueError as exc:
            raise RepassError(f"bad count at {source}:{lineno}: {raw!r}") from exc
    return counts


def load_frequency_table(path: str | Path) -> dict[str, int]:
    p = Path(path)
    if not p.is_file():
        raise RepassError(f"frequency table not found: {p}")
    return parse_frequency_table(p.read_text(encoding="utf-8"), str(p))


@lru_cache(maxsize=None)
def default_background_freqs() -> dict[str, int]:
    return parse_frequency_table(_read_asset("background_freqs.txt"), "background_freqs.txt")
