"""LLM-backed agents with deterministic local validation.

Every agent output passes a local validator before it can reach a prompt;
with a scripted client the whole layer is bit-reproducible. Failures never
abort the pipeline: each operation has a documented fallback (config topic,
empty list, template sentence, or pass-through).

Three client implementations ship here: an HTTP client speaking the
chat-completions wire format, a table-driven scripted client for replaying
fixtures, and a heuristic client that answers every agent task with the
deterministic extraction machinery (useful for offline runs and the
simulation harness).
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import httpx

from . import prompts
from .errors import ChatClientError, VerdictParseError
from .extraction import fuzzy_scan, person_candidates
from .lexicon import Lexicon
from .promptbuild import TokenBudget, count_tokens, template_sentence
from .stringsim import Matcher, MatchResult
from .textnorm import normalize

logger = logging.getLogger(__name__)

DEFAULT_RETRIES = 2


@dataclass(frozen=True)
class DecodeParams:
    """Decoding is pinned for reproducibility: greedy, bounded output."""

    temperature: float = 0.0
    max_tokens: int = 256


@dataclass(frozen=True)
class DeciderVerdict:
    answer: str  # "YES" | "NO"
    reason: str = ""

    @property
    def yes(self) -> bool:
        return self.answer == "YES"


@dataclass(frozen=True)
class TopicResult:
    topic: str
    fallback: bool


class ChatClient(ABC):
    """Stateless chat-completion interface shared by all agent calls."""

    @abstractmethod
    def complete(self, system_prompt: str, user_payload: str) -> str:
        """Return the assistant text for one system+user exchange."""


def prompt_key(system_prompt: str, user_payload: str) -> str:
    digest = hashlib.sha256((system_prompt + "\x1e" + user_payload).encode("utf-8"))
    return digest.hexdigest()[:16]


class ScriptedChatClient(ChatClient):
    """Replays a fixed prompt-hash -> response table.

    Fixture files are JSONL records {"key": <prompt_key>, "response": ...}.
    Unknown prompts raise unless a default response is supplied.
    """

    def __init__(self, table: Mapping[str, str], default: str | None = None):
        self._table = dict(table)
        self._default = default

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str, str]], default: str | None = None) -> "ScriptedChatClient":
        return cls({prompt_key(system, user): response for system, user, response in pairs}, default=default)

    @classmethod
    def from_file(cls, path: str | Path, default: str | None = None) -> "ScriptedChatClient":
        table: dict[str, str] = {}
        p = Path(path)
        if not p.is_file():
            raise ChatClientError(f"scripted-client fixture not found: {p}")
        for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                table[record["key"]] = record["response"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ChatClientError(f"bad fixture record at {p}:{lineno}") from exc
        return cls(table, default=default)

    @staticmethod
    def write_fixture(path: str | Path, pairs: Iterable[tuple[str, str, str]]) -> None:
        lines = [
            json.dumps({"key": prompt_key(system, user), "response": response}, sort_keys=True)
            for system, user, response in pairs
        ]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    def complete(self, system_prompt: str, user_payload: str) -> str:
        key = prompt_key(system_prompt, user_payload)
        if key in self._table:
            return self._table[key]
        if self._default is not None:
            return self._default
        raise ChatClientError(f"no scripted response for prompt key {key}")


class HttpChatClient(ChatClient):
    """Chat-completions endpoint over HTTPS with bearer auth.

    The API key comes from an environment variable, never from config
    files. A semaphore caps in-flight requests for rate-limit protection.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key_env: str = "CHAT_API_KEY",
        timeout: float = 30.0,
        max_retries: int = 2,
        max_in_flight: int = 4,
        decode: DecodeParams = DecodeParams(),
        client: httpx.Client | None = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.decode = decode
        self.max_retries = max_retries
        self._api_key_env = api_key_env
        self._semaphore = threading.Semaphore(max_in_flight)
        self._client = client or httpx.Client(timeout=timeout)

    def complete(self, system_prompt: str, user_payload: str) -> str:
        api_key = os.environ.get(self._api_key_env, "")
        if not api_key:
            raise ChatClientError(f"missing API key: set ${self._api_key_env}")
        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": system_prompt},
                {"role": "user", "content": user_payload},
            ],
            "temperature": self.decode.temperature,
            "max_tokens": self.decode.max_tokens,
        }
        headers = {"Authorization": f"Bearer {api_key}"}
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            try:
                with self._semaphore:
                    response = self._client.post(self.endpoint, json=body, headers=headers)
            except httpx.HTTPError as exc:
                last_error = exc
                time.sleep(min(2.0, 0.2 * (attempt + 1)))
                continue
            if response.status_code >= 500:
                last_error = ChatClientError(f"server error {response.status_code}")
                time.sleep(min(2.0, 0.2 * (attempt + 1)))
                continue
            if response.status_code != 200:
                raise ChatClientError(f"chat endpoint returned {response.status_code}: {response.text[:200]}")
            try:
                content = response.json()["choices"][0]["message"]["content"]
            except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
                raise ChatClientError("malformed chat completion response") from exc
            if not isinstance(content, str):
                raise ChatClientError("chat completion content is not text")
            return content
        raise ChatClientError(f"chat request failed after {self.max_retries + 1} attempts: {last_error}")

    def close(self) -> None:
        self._client.close()


def _select_spans(hits: list) -> list:
    """Resolve overlapping scan hits: best score wins, then earlier, then longer."""
    chosen = []
    occupied: set[int] = set()
    for hit in sorted(hits, key=lambda h: (-h.score, h.position, -h.length)):
        span = set(range(hit.position, hit.position + hit.length))
        if span & occupied:
            continue
        occupied |= span
        chosen.append(hit)
    chosen.sort(key=lambda h: h.position)
    return chosen


class HeuristicChatClient(ChatClient):
    """Deterministic local stand-in answering each agent task without a model.

    Dispatches on the system prompt and solves the task with the fuzzy
    matching and extraction primitives. Stateless and bit-reproducible,
    which makes it the chat side of the simulation harness.
    """

    def __init__(self, lexicon: Lexicon, domain_label: str | None = None, tau_detect: float = 0.75):
        self._lexicon = lexicon
        self._domain_label = domain_label or lexicon.domain_label or "general domain commentary"
        self._tau = tau_detect
        self._name_matcher = Matcher(lexicon.name_displays()) if lexicon.names else None

    def complete(self, system_prompt: str, user_payload: str) -> str:
        fields = prompts.parse_payload(user_payload)
        transcript = fields.get("transcript", "")
        if system_prompt == prompts.TOPIC_SYSTEM:
            return self._domain_label
        if system_prompt == prompts.NER_SYSTEM:
            return ", ".join(name for name, _ in self._name_hits(transcript))
        if system_prompt == prompts.JARGON_SYSTEM:
            return ", ".join(self._jargon_hits(transcript))
        if system_prompt == prompts.NER_DECIDER_SYSTEM:
            misspelled = [name for name, score in self._name_hits(transcript) if score < 1.0]
            if misspelled:
                return json.dumps({"Answer": "YES", "Reason": f"likely misspelling of {misspelled[0]}"})
            return json.dumps({"Answer": "NO", "Reason": "all detected names match the roster"})
        if system_prompt == prompts.JARGON_DECIDER_SYSTEM:
            words = normalize(transcript).words
            hits = fuzzy_scan(words, self._lexicon.jargon_displays(), self._tau) if self._lexicon.jargon else []
            if any(h.score < 1.0 for h in _select_spans(hits)):
                return json.dumps({"Answer": "YES", "Reason": "misspelled domain term detected"})
            return json.dumps({"Answer": "NO", "Reason": "no misspelled domain terms"})
        if system_prompt == prompts.BEST_CANDIDATES_SYSTEM:
            ranked = [name for name, score in self._name_hits(transcript, by_risk=True) if score < 1.0]
            return json.dumps({"names": ranked[:3]})
        if system_prompt == prompts.SENTENCE_SYSTEM:
            return template_sentence(
                fields.get("topic", self._domain_label),
                prompts.split_listing(fields.get("names", "")),
                prompts.split_listing(fields.get("jargon", "")),
            )
        if system_prompt == prompts.FIX_SYSTEM:
            return self._fix(transcript)
        raise ChatClientError("heuristic client has no handler for this prompt")

    def _name_hits(self, transcript: str, by_risk: bool = False) -> list[tuple[str, float]]:
        if self._name_matcher is None:
            return []
        roster = self._lexicon.name_displays()
        best_per_name: dict[str, tuple[int, float]] = {}
        for order, surface in enumerate(person_candidates(transcript, roster, tau_match=self._tau)):
            match = self._name_matcher.best(surface, floor=self._tau)
            if not match.accepted:
                continue
            known = best_per_name.get(match.canonical)
            if known is None:
                best_per_name[match.canonical] = (order, match.score)
            elif match.score > known[1]:
                best_per_name[match.canonical] = (known[0], match.score)
        hits = [(name, score) for name, (order, score) in sorted(best_per_name.items(), key=lambda kv: kv[1][0])]
        if by_risk:
            hits.sort(key=lambda item: -item[1])
        return hits

    def _jargon_hits(self, transcript: str) -> list[str]:
        if not self._lexicon.jargon:
            return []
        words = normalize(transcript).words
        hits = fuzzy_scan(words, self._lexicon.jargon_displays(), self._tau)
        out: list[str] = []
        for hit in _select_spans(hits):
            if hit.canonical not in out:
                out.append(hit.canonical)
        return out

    def _fix(self, transcript: str) -> str:
        entries = self._lexicon.name_displays() + self._lexicon.jargon_displays()
        if not entries:
            return transcript
        fixed_lines: list[str] = []
        for line in transcript.split("\n"):
            words = list(normalize(line).words)
            taken = [
                (h.position, h.length, h.canonical)
                for h in _select_spans(fuzzy_scan(words, entries, self._tau))
                if h.score < 1.0
            ]
            if not taken:
                fixed_lines.append(line)
                continue
            taken.sort()
            rebuilt: list[str] = []
            i = 0
            while i < len(words):
                replacement = next((t for t in taken if t[0] == i), None)
                if replacement:
                    rebuilt.append(replacement[2])
                    i += replacement[1]
                else:
                    rebuilt.append(words[i])
                    i += 1
            fixed_lines.append(" ".join(rebuilt))
        return "\n".join(fixed_lines)


# ---------------------------------------------------------------------------
# Agent operations
# ---------------------------------------------------------------------------


def topic_agent(
    client: ChatClient,
    transcript: str,
    *,
    fallback_topic: str,
    max_retries: int = DEFAULT_RETRIES,
) -> TopicResult:
    """2-5 word domain label for the transcript; config fallback on failure."""
    if not transcript.strip():
        raise ValueError("topic_agent requires a non-empty transcript")
    payload = prompts.build_payload(transcript=transcript)
    for _ in range(max_retries + 1):
        try:
            raw = client.complete(prompts.TOPIC_SYSTEM, payload)
        except ChatClientError as exc:
            logger.warning("topic agent client failure: %s", exc)
            return TopicResult(topic=fallback_topic, fallback=True)
        topic = " ".join(raw.strip().strip('"').rstrip(".").split())
        if 2 <= len(topic.split()) <= 5:
            return TopicResult(topic=topic, fallback=False)
        logger.debug("topic agent output rejected (%r), retrying", raw)
    return TopicResult(topic=fallback_topic, fallback=True)


def _verbatim_in(name: str, transcript_words: tuple[str, ...]) -> bool:
    target = normalize(name).words
    if not target:
        return False
    n = len(target)
    return any(transcript_words[i : i + n] == target for i in range(len(transcript_words) - n + 1))


def ner_agent(
    client: ChatClient,
    transcript: str,
    topic: str,
    lexicon: Lexicon,
    *,
    tau_replace: float = 0.85,
) -> list[str]:
    """Validated person names: roster matches canonicalized, hallucinations dropped.

    A name survives only if its best roster match clears tau_replace (it is
    then replaced by the canonical display form) or it appears verbatim in
    the transcript. Deduplicated in first-appearance order.
    """
    if not lexicon.names:
        return []
    payload = prompts.build_payload(topic=topic, roster=lexicon.name_displays(), transcript=transcript)
    raw = client.complete(prompts.NER_SYSTEM, payload)
    matcher = Matcher(lexicon.name_displays())
    transcript_words = normalize(transcript).words
    out: list[str] = []
    seen: set[str] = set()
    for name in prompts.split_listing(raw):
        match = matcher.best(name, floor=tau_replace)
        if match.accepted:
            kept = match.canonical
        elif _verbatim_in(name, transcript_words):
            kept = name
        else:
            logger.debug("ner agent dropped unvalidated name %r", name)
            continue
        key = normalize(kept).joined
        if key not in seen:
            seen.add(key)
            out.append(kept)
    return out


def jargon_agent(
    client: ChatClient,
    transcript: str,
    topic: str,
    lexicon: Lexicon,
    *,
    tau_jargon: float = 0.90,
) -> list[str]:
    """Validated glossary terms; anything off-glossary or roster-shaped is dropped."""
    if not lexicon.jargon:
        return []
    payload = prompts.build_payload(topic=topic, glossary=lexicon.jargon_displays(), transcript=transcript)
    raw = client.complete(prompts.JARGON_SYSTEM, payload)
    matcher = Matcher(lexicon.jargon_displays())
    out: list[str] = []
    seen: set[str] = set()
    for term in prompts.split_listing(raw):
        if normalize(term).joined in lexicon.names:
            continue
        match = matcher.best(term, floor=tau_jargon)
        if match.accepted and match.canonical not in seen:
            seen.add(match.canonical)
            out.append(match.canonical)
    return out


_JSON_BLOCK_RE = re.compile(r"\{.*\}", re.DOTALL)


def parse_verdict(raw: str) -> DeciderVerdict:
    """Strict YES/NO from a JSON verdict; anything else raises, never silent NO."""
    block = _JSON_BLOCK_RE.search(raw)
    if not block:
        raise VerdictParseError(f"no JSON verdict in decider output: {raw[:120]!r}")
    try:
        data = json.loads(block.group())
    except json.JSONDecodeError as exc:
        raise VerdictParseError(f"unparseable decider output: {raw[:120]!r}") from exc
    answer = data.get("Answer", data.get("answer"))
    if not isinstance(answer, str) or answer.strip().upper() not in ("YES", "NO"):
        raise VerdictParseError(f"decider answer missing or not YES/NO: {raw[:120]!r}")
    reason = data.get("Reason", data.get("reason", ""))
    return DeciderVerdict(answer=answer.strip().upper(), reason=str(reason))


def shadow_name_check(
    transcript: str,
    lexicon: Lexicon,
    *,
    tau_match: float = 0.75,
    low: float = 0.5,
) -> list[MatchResult]:
    """Deterministic audit of likely-misspelled names (0.5 <= score < 1)."""
    if not lexicon.names:
        return []
    matcher = Matcher(lexicon.name_displays())
    flagged: list[MatchResult] = []
    for surface in person_candidates(transcript, lexicon.name_displays(), tau_match=tau_match):
        match = matcher.best(surface, floor=low)
        if low <= match.score < 1.0:
            flagged.append(match)
    return flagged


def ner_decider(
    client: ChatClient,
    transcript: str,
    lexicon: Lexicon,
    *,
    tau_match: float = 0.75,
) -> DeciderVerdict:
    """YES/NO on whether any person name looks misspelled.

    The local shadow check is logged alongside for audit; parse failures
    raise and the pipeline treats them as NO (skip the name injection).
    """
    shadow = shadow_name_check(transcript, lexicon, tau_match=tau_match)
    if shadow:
        logger.debug(
            "ner decider shadow check flags: %s",
            ", ".join(f"{m.query!r}->{m.canonical!r} ({m.score:.3f})" for m in shadow),
        )
    payload = prompts.build_payload(roster=lexicon.name_displays(), transcript=transcript)
    return parse_verdict(client.complete(prompts.NER_DECIDER_SYSTEM, payload))


def jargon_decider(
    client: ChatClient,
    transcript: str,
    topic: str,
    jargon_list: list[str],
    budget: TokenBudget,
) -> DeciderVerdict:
    """YES only for a detected misspelling AND a prompt that fits the window.

    The budget check is re-verified locally whatever the agent claims.
    """
    if not jargon_list:
        return DeciderVerdict(answer="NO", reason="no candidate terms")
    payload = prompts.build_payload(topic=topic, jargon=jargon_list, transcript=transcript)
    verdict = parse_verdict(client.complete(prompts.JARGON_DECIDER_SYSTEM, payload))
    if verdict.yes:
        projected = template_sentence(topic, [], jargon_list)
        if count_tokens(projected, budget) > budget.hard_limit:
            return DeciderVerdict(answer="NO", reason="prompt budget exceeded (local override)")
    return verdict


def best_candidates(
    client: ChatClient,
    transcript: str,
    lexicon: Lexicon,
    *,
    tau_replace: float = 0.85,
    limit: int = 3,
) -> list[str]:
    """Top corrected names, every one locally validated against the roster."""
    if not lexicon.names:
        return []
    payload = prompts.build_payload(roster=lexicon.name_displays(), transcript=transcript)
    raw = client.complete(prompts.BEST_CANDIDATES_SYSTEM, payload)
    block = _JSON_BLOCK_RE.search(raw)
    names: list[str] = []
    if block:
        try:
            data = json.loads(block.group())
            maybe = data.get("names", [])
            if isinstance(maybe, list):
                names = [n for n in maybe if isinstance(n, str)]
        except json.JSONDecodeError:
            logger.debug("best_candidates output unparseable: %r", raw[:120])
    matcher = Matcher(lexicon.name_displays())
    out: list[str] = []
    seen: set[str] = set()
    for name in names:
        norm = normalize(name).joined
        if norm in lexicon.names:
            kept = lexicon.names[norm]
        else:
            match = matcher.best(name, floor=tau_replace)
            if not match.accepted:
                logger.debug("best_candidates dropped non-roster name %r", name)
                continue
            kept = match.canonical
        if kept not in seen:
            seen.add(kept)
            out.append(kept)
        if len(out) == limit:
            break
    return out


_SENTENCE_TERMINALS = (".", "!", "?")


def _valid_sentence(text: str, names: list[str], topic: str) -> bool:
    if "\n" in text or not text.endswith("."):
        return False
    if any(ch in text[:-1] for ch in _SENTENCE_TERMINALS):
        return False
    if not all(name in text for name in names):
        return False
    topic_at = text.find(topic)
    if topic_at >= 0:
        return all(text.find(name) > topic_at for name in names)
    return True


def sentence_builder(
    client: ChatClient,
    topic: str,
    names: list[str],
    jargon: list[str],
    *,
    max_retries: int = DEFAULT_RETRIES,
) -> str:
    """Exactly one sentence containing all names; template fallback guarantees output."""
    payload = prompts.build_payload(topic=topic, names=names, jargon=jargon)
    for _ in range(max_retries + 1):
        try:
            raw = client.complete(prompts.SENTENCE_SYSTEM, payload).strip()
        except ChatClientError as exc:
            logger.warning("sentence builder client failure: %s", exc)
            break
        if _valid_sentence(raw, names, topic):
            return raw
        logger.debug("sentence builder output rejected (%r), retrying", raw)
    return template_sentence(topic, names, jargon)


def fix_agent(client: ChatClient, transcript: str) -> str:
    """Proofread transcript edit; line structure must survive or the input wins."""
    if not transcript.strip():
        raise ValueError("fix_agent requires a non-empty transcript")
    try:
        raw = client.complete(prompts.FIX_SYSTEM, prompts.build_payload(transcript=transcript))
    except ChatClientError as exc:
        logger.warning("fix agent client failure, passing input through: %s", exc)
        return transcript
    edited = raw.strip("\n")
    if len(edited.split("\n")) != len(transcript.strip("\n").split("\n")):
        logger.debug("fix agent changed the line count; rejecting edit")
        return transcript
    return edited
