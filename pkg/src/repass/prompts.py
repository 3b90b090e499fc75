"""System instructions for the enhancement agents, plus the payload codec.

User payloads are labeled blocks so scripted clients can parse them back
deterministically: single-line fields first ("topic: ...", "names: a, b"),
then the multi-line transcript introduced by a bare "transcript:" line.
Few-shot example blocks, when configured, are appended to the system
instructions verbatim.
"""

from __future__ import annotations

TOPIC_SYSTEM = """You label the domain of a transcript.
Read the transcript and reply with its main topic or domain only.
The reply must be between 2 and 5 words, with no punctuation and no commentary."""

NER_SYSTEM = """You extract person names from a transcript and repair their spelling.
You receive a topic line, a roster of correctly spelled names, and the transcript.
Find the person names mentioned in the transcript. Compare each one against the
roster using fuzzy spelling similarity; when a roster entry is clearly the
intended person (similarity at least 0.85), use the roster spelling, otherwise
keep the surface form unchanged.
Remove duplicates, keep first-appearance order, and use proper capitalization
and hyphenation.
Reply with only the comma-separated list of names, or an empty line if none."""

JARGON_SYSTEM = """You extract domain-specific terminology from a transcript.
You receive a topic line, a glossary of domain terms, and the transcript.
Collect candidate terms by keyword salience, then compare each candidate against
the glossary with fuzzy spelling similarity; when similarity is at least 0.90,
correct the candidate to the glossary spelling. Keep only terms supported by the
transcript and the domain, exclude person names, remove duplicates, and apply
proper casing.
Reply with only the comma-separated list of terms, or an empty line if none."""

NER_DECIDER_SYSTEM = """You are a decision-only agent that checks a transcript for misspelled person names.
You receive a roster of correct names and the transcript.
A name counts as misspelled when it closely resembles a roster entry
(similarity at least 0.85) without matching it exactly.
Reply with JSON only, in the form:
{"Answer": "YES" | "NO", "Reason": "<brief explanation>"}"""

JARGON_DECIDER_SYSTEM = """You are a decision-only agent that decides whether adding the listed jargon terms
to a speech recognizer's decoding prompt would improve accuracy.
You receive a topic line, the candidate jargon list, and the transcript.
Answer YES only when at least one listed term appears misspelled in the
transcript (fuzzy similarity at least 0.85 to the correct form) and the
resulting prompt stays within the 224-token budget.
Reply with JSON only, in the form:
{"Answer": "YES" | "NO", "Reason": "<brief explanation>"}"""

BEST_CANDIDATES_SYSTEM = """You rank person names by how likely they are misspelled in a transcript.
You receive a roster of correct names and the transcript.
Find person mentions, score their spelling similarity against the roster, and
rank them by misspelling risk.
Reply with JSON only, listing at most three corrected roster names,
highest risk first, in the form:
{"names": ["<name1>", "<name2>", "<name3>"]}"""

SENTENCE_SYSTEM = """You write one short, fluent sentence that packs together a topic, person names,
and domain jargon, for use as a decoding hint.
The sentence must mention the topic before any name, include every listed name
verbatim, keep the rarest words near the end, and be exactly one sentence
ending in a period, with no line breaks.
Reply with the sentence only."""

FIX_SYSTEM = """You are a careful proofreader for machine-generated transcripts.
Fix obvious recognition errors (spelling, casing, punctuation) without changing
the meaning. Never merge, split, reorder, drop, or paraphrase lines; preserve
speaker labels and timestamps; when unsure, leave the text unchanged.
Reply with the corrected transcript only."""

_FIELD_ORDER = ("topic", "names", "jargon", "roster", "glossary")


def build_payload(
    *,
    transcript: str | None = None,
    topic: str | None = None,
    names: list[str] | None = None,
    jargon: list[str] | None = None,
    roster: list[str] | None = None,
    glossary: list[str] | None = None,
) -> str:
    values = {
        "topic": topic,
        "names": ", ".join(names) if names is not None else None,
        "jargon": ", ".join(jargon) if jargon is not None else None,
        "roster": ", ".join(roster) if roster is not None else None,
        "glossary": ", ".join(glossary) if glossary is not None else None,
    }
    lines = [f"{key}: {values[key]}" for key in _FIELD_ORDER if values[key] is not None]
    if transcript is not None:
        lines.append("transcript:")
        lines.append(transcript)
    return "\n".join(lines)


def parse_payload(payload: str) -> dict[str, str]:
    """Inverse of build_payload; the transcript keeps its internal newlines."""
    fields: dict[str, str] = {}
    lines = payload.split("\n")
    for idx, line in enumerate(lines):
        if line == "transcript:":
            fields["transcript"] = "\n".join(lines[idx + 1 :])
            break
        key, sep, value = line.partition(": ")
        if sep and key in _FIELD_ORDER:
            fields[key] = value
    return fields


def split_listing(value: str) -> list[str]:
    return [item.strip() for item in value.split(",") if item.strip()]
