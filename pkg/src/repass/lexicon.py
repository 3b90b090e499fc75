"""Domain knowledge: canonical person-name rosters and jargon glossaries.

File format for both: UTF-8 text, one entry per line, ``#`` starts a
comment, blank lines ignored. Display forms keep official capitalization,
hyphenation, and diacritics; lookups go through the folded normalized form
so "jokic" in a transcript matches "Nikola Jokić" on the roster.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DuplicateEntryError, LexiconError, UnknownEntryError
from .textnorm import normalize

logger = logging.getLogger(__name__)


def _parse_entry_file(path: str | Path, what: str) -> dict[str, str]:
    p = Path(path)
    if not p.is_file():
        raise LexiconError(f"{what} file not found: {p}")
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        display = raw.split("#", 1)[0].strip()
        if not display:
            continue
        norm = normalize(display).joined
        if not norm:
            raise LexiconError(f"{what} entry normalizes to nothing at {p}:{lineno}: {raw!r}")
        if norm in entries:
            raise DuplicateEntryError(
                f"duplicate {what} entry {display!r} at {p}:{lineno} "
                f"(collides with {entries[norm]!r} on normalized form {norm!r})"
            )
        entries[norm] = display
    if not entries:
        logger.warning("%s file %s is empty", what, p)
    return entries


def load_roster(path: str | Path) -> dict[str, str]:
    """Mapping of normalized form -> display form for person names."""
    return _parse_entry_file(path, "roster")


def load_glossary(path: str | Path) -> dict[str, str]:
    """Mapping of normalized form -> display form for jargon phrases."""
    return _parse_entry_file(path, "glossary")


@dataclass(frozen=True)
class Lexicon:
    """Immutable roster + glossary pair; safe to share across threads."""

    names: dict[str, str]
    jargon: dict[str, str]
    domain_label: str = ""

    def __post_init__(self) -> None:
        overlap = set(self.names) & set(self.jargon)
        if overlap:
            raise LexiconError(f"roster and glossary overlap on normalized forms: {sorted(overlap)}")

    @classmethod
    def from_files(cls, roster_path: str | Path, glossary_path: str | Path, domain_label: str = "") -> "Lexicon":
        return cls(names=load_roster(roster_path), jargon=load_glossary(glossary_path), domain_label=domain_label)

    def name_displays(self) -> list[str]:
        return list(self.names.values())

    def jargon_displays(self) -> list[str]:
        return list(self.jargon.values())

    def is_name(self, text: str) -> bool:
        return normalize(text).joined in self.names

    def is_jargon(self, text: str) -> bool:
        return normalize(text).joined in self.jargon


def canonical_display(normalized: str, lex: Lexicon) -> str:
    """Stored display form for a normalized entry; raises if unknown."""
    if normalized in lex.names:
        return lex.names[normalized]
    if normalized in lex.jargon:
        return lex.jargon[normalized]
    raise UnknownEntryError(f"no lexicon entry for normalized form {normalized!r}")
