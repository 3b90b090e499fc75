"""Assembly of the decoding context prompt under the consumer token window.

The consuming recognizer reads only the trailing 224 tokens of its prompt,
and later tokens carry more weight, so the builder keeps prompts compact
(default target 20 tokens) and places names/jargon after the topic. When no
subword tokenizer is configured, token counts use a conservative heuristic
of ceil(1.5 tokens per whitespace word).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .errors import RepassError

HARD_TOKEN_LIMIT = 224
DEFAULT_TARGET_TOKENS = 20
HEURISTIC_TOKENS_PER_WORD = 1.5

SentenceBuilder = Callable[[str, list[str], list[str]], str]


class SubwordTokenizer:
    """Greedy merge-based subword encoder loaded from a merges file.

    File format: one merge per line, two space-separated pieces, highest
    priority first; ``#`` comments and blank lines ignored. Words are split
    to characters and adjacent pairs merged in priority order.
    """

    def __init__(self, merges: Sequence[tuple[str, str]]):
        self._ranks = {pair: rank for rank, pair in enumerate(merges)}

    @classmethod
    def from_file(cls, path: str | Path) -> "SubwordTokenizer":
        p = Path(path)
        if not p.is_file():
            raise RepassError(f"tokenizer merges file not found: {p}")
        merges: list[tuple[str, str]] = []
        for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise RepassError(f"bad merge rule at {p}:{lineno}: {raw!r}")
            merges.append((parts[0], parts[1]))
        return cls(merges)

    def _encode_word(self, word: str) -> list[str]:
        pieces = list(word)
        while len(pieces) > 1:
            best_rank = None
            best_idx = -1
            for i in range(len(pieces) - 1):
                rank = self._ranks.get((pieces[i], pieces[i + 1]))
                if rank is not None and (best_rank is None or rank < best_rank):
                    best_rank = rank
                    best_idx = i
            if best_rank is None:
                break
            pieces[best_idx : best_idx + 2] = [pieces[best_idx] + pieces[best_idx + 1]]
        return pieces

    def encode(self, text: str) -> list[str]:
        return [piece for word in text.split() for piece in self._encode_word(word)]

    def encode_with_boundaries(self, text: str) -> list[tuple[str, bool]]:
        """Pieces paired with a starts-a-word flag, for window truncation."""
        out: list[tuple[str, bool]] = []
        for word in text.split():
            for idx, piece in enumerate(self._encode_word(word)):
                out.append((piece, idx == 0))
        return out


@dataclass(frozen=True)
class TokenBudget:
    """Prompt size limits; the 224-token hard limit mirrors the consumer model."""

    hard_limit: int = HARD_TOKEN_LIMIT
    target_limit: int = DEFAULT_TARGET_TOKENS
    tokenizer: SubwordTokenizer | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if not (0 < self.target_limit <= self.hard_limit):
            raise ValueError(f"target_limit must be in (0, {self.hard_limit}]")


@dataclass(frozen=True)
class ContextPrompt:
    text: str
    token_count: int
    topic: str
    names: tuple[str, ...] = ()
    jargon: tuple[str, ...] = ()


def count_tokens(text: str, budget: TokenBudget) -> int:
    words = text.split()
    if not words:
        return 0
    if budget.tokenizer is not None:
        return len(budget.tokenizer.encode(text))
    return math.ceil(HEURISTIC_TOKENS_PER_WORD * len(words))


def template_sentence(topic: str, names: Sequence[str], jargon: Sequence[str]) -> str:
    """Deterministic one-sentence fallback: topic, then names, then jargon."""
    sentence = topic.strip().rstrip(".")
    if names:
        sentence += " featuring " + ", ".join(names)
    if jargon:
        sentence += " with " + ", ".join(jargon)
    return sentence + "."


def truncate_to_window(prompt: str, budget: TokenBudget) -> str:
    """Trailing portion of the prompt that the consumer model will consume."""
    if count_tokens(prompt, budget) <= budget.hard_limit:
        return prompt
    if budget.tokenizer is not None:
        pieces = budget.tokenizer.encode_with_boundaries(prompt)
        kept = pieces[-budget.hard_limit :]
        text = ""
        for piece, starts_word in kept:
            if starts_word and text:
                text += " "
            text += piece
        return text
    words = prompt.split()
    max_words = int(budget.hard_limit / HEURISTIC_TOKENS_PER_WORD)
    return " ".join(words[-max_words:])


def build_prompt(
    topic: str,
    names: Sequence[str],
    jargon: Sequence[str],
    budget: TokenBudget,
    builder: SentenceBuilder,
) -> ContextPrompt:
    """One sentence within budget; trims jargon first, then surplus names.

    The trim order reflects where the value is: names drive the largest
    accuracy gains and the topic is cheap context, so jargon goes first
    (lowest salience last in the input list, dropped from the end), then
    names beyond the top two. The hard limit always holds; the worst case
    degenerates to a topic-only sentence.
    """
    topic = topic.strip()
    if not topic:
        raise ValueError("build_prompt requires a non-empty topic")
    kept_names = list(names)
    kept_jargon = list(jargon)

    def render() -> str:
        if kept_names or kept_jargon:
            sentence = builder(topic, list(kept_names), list(kept_jargon))
            if all(name in sentence for name in kept_names):
                return sentence
            # Builder contract violated; fall back to the template.
            return template_sentence(topic, kept_names, kept_jargon)
        return template_sentence(topic, [], [])

    sentence = render()
    count = count_tokens(sentence, budget)
    while count > budget.target_limit:
        if kept_jargon:
            kept_jargon.pop()
        elif len(kept_names) > 2:
            kept_names.pop()
        else:
            break
        sentence = render()
        count = count_tokens(sentence, budget)

    while count > budget.hard_limit and kept_names:
        kept_names.pop()
        sentence = render()
        count = count_tokens(sentence, budget)
    if count > budget.hard_limit:
        sentence = truncate_to_window(sentence, budget)
        count = count_tokens(sentence, budget)
        kept_names = [n for n in kept_names if n in sentence]
        kept_jargon = [j for j in kept_jargon if j in sentence]

    return ContextPrompt(
        text=sentence,
        token_count=count,
        topic=topic,
        names=tuple(kept_names),
        jargon=tuple(kept_jargon),
    )
