"""ASR backends: abstract interface, HTTP transport, and a corruption-model mock.

The mock lets the whole two-pass pipeline run end to end at desk scale: it
reads a ground-truth transcript, injects errors shaped like the observed
field taxonomy (name substitutions, jargon corruption, accent effects, word
drops), and models lexical prompt biasing as a rescue probability: a
corrupted entity whose canonical form appears in the prompt is emitted
correctly with probability ``prompt_rescue_prob``.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path

import httpx

from .errors import AsrBackendError, AsrTransportError
from .lexicon import Lexicon
from .textnorm import normalize

# Word drops are scaled down so segmentation stays a minority share of the
# injected errors, matching its share of the observed taxonomy.
WORD_DROP_FACTOR = 0.2

_VOWEL_GROUP_RE = re.compile(r"[aeiou]+")
_VOWEL_SWAP = {"a": "e", "e": "i", "i": "o", "o": "u", "u": "a"}


class AsrBackend(ABC):
    """Transcription interface; prompt-free calls are a plain first pass."""

    @abstractmethod
    def transcribe(self, audio_ref: str, initial_prompt: str | None = None) -> str:
        """Transcript text for an audio locator, optionally prompt-biased."""


class HttpAsrBackend(AsrBackend):
    """JSON transport to a transcription server.

    Request body: {"audio": <locator>, "initial_prompt": ..., "model": ...}
    with the optional fields present only when set. Response: {"text": ...}.
    Transport failures and backend failures raise distinct errors, and the
    transcript bytes are returned untouched.
    """

    def __init__(
        self,
        endpoint: str,
        model: str | None = None,
        timeout: float = 120.0,
        client: httpx.Client | None = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self._client = client or httpx.Client(timeout=timeout)

    def transcribe(self, audio_ref: str, initial_prompt: str | None = None) -> str:
        body: dict[str, str] = {"audio": audio_ref}
        if initial_prompt is not None:
            body["initial_prompt"] = initial_prompt
        if self.model is not None:
            body["model"] = self.model
        try:
            response = self._client.post(self.endpoint, json=body)
        except httpx.HTTPError as exc:
            raise AsrTransportError(f"ASR endpoint unreachable: {exc}") from exc
        if response.status_code != 200:
            raise AsrBackendError(f"ASR endpoint returned {response.status_code}: {response.text[:200]}")
        try:
            text = response.json()["text"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise AsrBackendError("malformed ASR response: missing text field") from exc
        if not isinstance(text, str):
            raise AsrBackendError("malformed ASR response: text is not a string")
        return text

    def close(self) -> None:
        self._client.close()


@dataclass(frozen=True)
class CorruptionModel:
    """Error-injection rates for the mock backend.

    Defaults mirror the observed error-share taxonomy: name substitutions
    35%, jargon corruption 28%, accent effects 22%, segmentation 15%.
    """

    name_sub_rate: float = 0.35
    jargon_corrupt_rate: float = 0.28
    accent_rate: float = 0.22
    segmentation_rate: float = 0.15
    prompt_rescue_prob: float = 0.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        for field_name in (
            "name_sub_rate",
            "jargon_corrupt_rate",
            "accent_rate",
            "segmentation_rate",
            "prompt_rescue_prob",
        ):
            value = getattr(self, field_name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{field_name} must be in [0, 1], got {value}")


def _stable_rng(seed: int, *parts: str) -> random.Random:
    digest = hashlib.sha256((str(seed) + "\x1f" + "\x1f".join(parts)).encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def _swap_vowel_group(word: str, rng: random.Random) -> str:
    groups = list(_VOWEL_GROUP_RE.finditer(word))
    if not groups:
        return word
    chosen = groups[rng.randrange(len(groups))]
    replacement = _VOWEL_SWAP[chosen.group()[0]]
    return word[: chosen.start()] + replacement + word[chosen.end() :]


def _split_word(word: str) -> list[str]:
    # Split after the vowel group nearest the middle, mimicking how long
    # names fracture into pseudo-words.
    groups = list(_VOWEL_GROUP_RE.finditer(word))
    if len(groups) < 2:
        mid = len(word) // 2
        return [word[:mid], word[mid:]]
    mid = len(word) / 2
    cut = min((abs(g.end() - mid), g.end()) for g in groups[:-1])[1]
    return [word[:cut], word[cut:]]


def _mangle_name(tokens: tuple[str, ...], rng: random.Random) -> list[str]:
    # Split only the longest token: long surnames fracture into pseudo-words
    # while the rest of the name just drifts phonetically.
    split_idx = max(range(len(tokens)), key=lambda i: len(tokens[i]))
    if len(tokens[split_idx]) < 8:
        split_idx = -1
    out: list[str] = []
    for idx, token in enumerate(tokens):
        if idx == split_idx:
            head, tail = _split_word(token)
            out.append(head)
            out.append(_swap_vowel_group(tail, rng))
        else:
            out.append(_swap_vowel_group(token, rng))
    return out


def _mangle_jargon(tokens: tuple[str, ...], rng: random.Random) -> list[str]:
    if len(tokens) >= 2:
        # "pick and roll" -> "picker roll": merge the head, lose the middle.
        return [tokens[0] + "er", tokens[-1]]
    word = tokens[0]
    if len(word) >= 6:
        head, tail = _split_word(word)
        return [head, tail + "s"]
    return [_swap_vowel_group(word, rng)]


def _entity_occurrences(words: tuple[str, ...], lexicon: Lexicon) -> dict[int, tuple[str, int, str]]:
    """Map start position -> (kind, span length, canonical normalized form)."""
    tables = [("name", lexicon.names), ("jargon", lexicon.jargon)]
    spans: dict[int, tuple[str, int, str]] = {}
    occupied: set[int] = set()
    max_len = 0
    lookup: dict[tuple[str, ...], tuple[str, str]] = {}
    for kind, table in tables:
        for norm in table:
            key = tuple(norm.split())
            lookup[key] = (kind, norm)
            max_len = max(max_len, len(key))
    for n in range(max_len, 0, -1):
        for i in range(len(words) - n + 1):
            if any(pos in occupied for pos in range(i, i + n)):
                continue
            entry = lookup.get(tuple(words[i : i + n]))
            if entry is not None:
                kind, norm = entry
                spans[i] = (kind, n, norm)
                occupied.update(range(i, i + n))
    return spans


def _prompt_contains(prompt_words: tuple[str, ...], canonical_norm: str) -> bool:
    target = tuple(canonical_norm.split())
    n = len(target)
    return any(prompt_words[i : i + n] == target for i in range(len(prompt_words) - n + 1))


def mock_transcribe(
    model: CorruptionModel,
    truth: str,
    lexicon: Lexicon,
    initial_prompt: str | None = None,
    *,
    segment_key: str | None = None,
) -> str:
    """Corrupted transcript of a ground-truth string, deterministic per seed.

    The corruption pattern depends only on (seed, segment_key, truth), never
    on the prompt, so prompted and unprompted passes corrupt identically;
    the prompt can only rescue corrupted entities back to the truth.
    """
    if not truth.strip():
        raise ValueError("mock_transcribe requires non-empty truth text")
    key = segment_key if segment_key is not None else truth
    rng_corrupt = _stable_rng(model.rng_seed, key, "corrupt")
    rng_rescue = _stable_rng(model.rng_seed, key, "rescue")
    words = normalize(truth).words
    prompt_words = normalize(initial_prompt).words if initial_prompt else ()
    spans = _entity_occurrences(words, lexicon)

    out: list[str] = []
    i = 0
    while i < len(words):
        span = spans.get(i)
        if span is not None:
            kind, length, canonical_norm = span
            original = words[i : i + length]
            if kind == "name":
                if rng_corrupt.random() < model.name_sub_rate:
                    corrupted = _mangle_name(original, rng_corrupt)
                elif rng_corrupt.random() < model.accent_rate:
                    corrupted = [_swap_vowel_group(t, rng_corrupt) for t in original]
                else:
                    corrupted = None
            else:
                if rng_corrupt.random() < model.jargon_corrupt_rate:
                    corrupted = _mangle_jargon(original, rng_corrupt)
                else:
                    corrupted = None
            if corrupted is not None and _prompt_contains(prompt_words, canonical_norm):
                if rng_rescue.random() < model.prompt_rescue_prob:
                    corrupted = None
            out.extend(corrupted if corrupted is not None else original)
            i += length
        else:
            if rng_corrupt.random() >= model.segmentation_rate * WORD_DROP_FACTOR:
                out.append(words[i])
            i += 1
    return " ".join(out)


class MockAsrBackend(AsrBackend):
    """Backend whose audio locators are paths to ground-truth text files."""

    def __init__(self, model: CorruptionModel, lexicon: Lexicon):
        self.model = model
        self.lexicon = lexicon

    def transcribe(self, audio_ref: str, initial_prompt: str | None = None) -> str:
        path = Path(audio_ref)
        if not path.is_file():
            raise AsrBackendError(f"mock backend expects a readable truth-text path, got {audio_ref!r}")
        truth = path.read_text(encoding="utf-8")
        return mock_transcribe(self.model, truth, self.lexicon, initial_prompt, segment_key=audio_ref)
