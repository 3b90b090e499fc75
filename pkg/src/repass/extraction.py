"""Deterministic candidate extraction: keyword mining, salience testing,
and heuristic person-name detection.

Everything here is pure and needs no model or network access; it both feeds
the jargon pipeline directly and serves as the local fallback for the
LLM-backed agents.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

from .assets import default_stopwords
from .stringsim import Matcher
from .textnorm import NormalizedText, normalize

# Extractor outputs are capped before glossary matching; the downstream
# prompt budget makes anything larger pointless.
DEFAULT_TOP_K = 10

_SENTENCE_SPLIT_RE = re.compile(r"[.!?\n]+")
_PHRASE_SPLIT_RE = re.compile(r"[^\w\s'’-]+")
_RAW_TOKEN_RE = re.compile(r"\S+")


@dataclass(frozen=True)
class ScoredTerm:
    term: str
    score: float
    method: str  # rake | yake | tfidf


@dataclass(frozen=True)
class DocumentFrequencies:
    """Corpus-level document frequencies backing TF-IDF."""

    total_docs: int
    df: Mapping[str, int]


@dataclass(frozen=True)
class SalienceVerdict:
    salient: bool
    g2: float


@dataclass(frozen=True)
class ScanHit:
    """A fuzzy lexicon hit over a token window of the transcript."""

    position: int
    length: int
    surface: str
    canonical: str
    score: float


def _sorted_terms(scores: Mapping[str, float], method: str) -> list[ScoredTerm]:
    ordered = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return [ScoredTerm(term=term, score=score, method=method) for term, score in ordered]


def rake_keywords(text: str, stopwords: Iterable[str] | None = None) -> list[ScoredTerm]:
    """Co-occurrence keyword extraction.

    Candidate phrases are maximal runs of non-stopword words between
    punctuation/stopword delimiters; a phrase scores the sum of
    degree(w)/frequency(w) over its member words.
    """
    stop = frozenset(w.lower() for w in (stopwords if stopwords is not None else default_stopwords()))
    phrases: list[tuple[str, ...]] = []
    for fragment in _PHRASE_SPLIT_RE.split(text):
        words = normalize(fragment).words
        run: list[str] = []
        for word in words:
            if word in stop:
                if run:
                    phrases.append(tuple(run))
                    run = []
            else:
                run.append(word)
        if run:
            phrases.append(tuple(run))
    if not phrases:
        return []

    freq: dict[str, int] = {}
    degree: dict[str, int] = {}
    for phrase in phrases:
        for word in phrase:
            freq[word] = freq.get(word, 0) + 1
            degree[word] = degree.get(word, 0) + len(phrase)

    scores: dict[str, float] = {}
    for phrase in phrases:
        scores[" ".join(phrase)] = sum(degree[w] / freq[w] for w in phrase)
    return _sorted_terms(scores, "rake")


def yake_keywords(text: str, max_ngram: int = 2) -> list[ScoredTerm]:
    """Single-document statistical keyword extraction, reduced feature set.

    Per word: S(w) = ln(2 + first_index) / (tf_norm(w) * dispersion(w)),
    where tf_norm is frequency over the max frequency and dispersion is the
    share of sentences containing the word. Lower S is more salient. An
    n-gram scores mean member S divided by its own frequency. Scores are
    re-mapped to 1/(1+S) so higher means more salient, like the other
    extractors.
    """
    if max_ngram < 1:
        raise ValueError("max_ngram must be >= 1")
    sentences = [normalize(s).words for s in _SENTENCE_SPLIT_RE.split(text)]
    sentences = [s for s in sentences if s]
    if not sentences:
        return []

    all_words = [w for sent in sentences for w in sent]
    tf: dict[str, int] = {}
    first_index: dict[str, int] = {}
    sentence_hits: dict[str, int] = {}
    for idx, word in enumerate(all_words):
        tf[word] = tf.get(word, 0) + 1
        first_index.setdefault(word, idx)
    for sent in sentences:
        for word in set(sent):
            sentence_hits[word] = sentence_hits.get(word, 0) + 1
    max_tf = max(tf.values())

    word_score = {
        w: math.log(2 + first_index[w]) / ((tf[w] / max_tf) * (sentence_hits[w] / len(sentences)))
        for w in tf
    }

    ngram_tf: dict[tuple[str, ...], int] = {}
    for sent in sentences:
        for n in range(1, max_ngram + 1):
            for i in range(len(sent) - n + 1):
                gram = tuple(sent[i : i + n])
                ngram_tf[gram] = ngram_tf.get(gram, 0) + 1

    scores: dict[str, float] = {}
    for gram, gram_tf in ngram_tf.items():
        raw = (sum(word_score[w] for w in gram) / len(gram)) / gram_tf
        scores[" ".join(gram)] = 1.0 / (1.0 + raw)
    return _sorted_terms(scores, "yake")


def tfidf_terms(doc: str, corpus_stats: DocumentFrequencies) -> list[ScoredTerm]:
    """Smoothed TF-IDF: tf(w) * (ln((1 + N) / (1 + df(w))) + 1)."""
    if corpus_stats.total_docs < 1:
        raise ValueError("corpus_stats must cover at least one document")
    tf: dict[str, int] = {}
    for word in normalize(doc).words:
        tf[word] = tf.get(word, 0) + 1
    n_docs = corpus_stats.total_docs
    scores = {
        w: count * (math.log((1 + n_docs) / (1 + corpus_stats.df.get(w, 0))) + 1.0)
        for w, count in tf.items()
    }
    return _sorted_terms(scores, "tfidf")


def term_salience(
    term: str,
    doc: str,
    background: Mapping[str, int],
    critical_value: float = 3.84,
) -> SalienceVerdict:
    """Dunning log-likelihood ratio of term rate in doc vs background.

    Salient when G2 meets the critical value (default: the 0.05 chi-square
    point) and the doc rate actually exceeds the background rate. A term
    absent from the doc is never salient, by definition.
    """
    if not background:
        raise ValueError("background frequency table must be non-empty")
    term_words = normalize(term).words
    doc_words = normalize(doc).words
    if not term_words:
        return SalienceVerdict(False, 0.0)
    n = len(term_words)
    a = sum(1 for i in range(len(doc_words) - n + 1) if tuple(doc_words[i : i + n]) == tuple(term_words))
    if a == 0:
        return SalienceVerdict(False, 0.0)
    c = len(doc_words)
    b = background.get(" ".join(term_words), 0)
    d = sum(background.values())
    expected_doc = c * (a + b) / (c + d)
    expected_bg = d * (a + b) / (c + d)
    g2 = 2.0 * a * math.log(a / expected_doc)
    if b > 0:
        g2 += 2.0 * b * math.log(b / expected_bg)
    if abs(g2) < 1e-12:
        g2 = 0.0
    salient = g2 >= critical_value and (a / c) > (b / d if d else 0.0)
    return SalienceVerdict(salient, g2)


@lru_cache(maxsize=256)
def _matcher_for(entries: tuple[str, ...]) -> Matcher:
    return Matcher(entries)


@lru_cache(maxsize=256)
def _max_entry_words(entries: tuple[str, ...]) -> int:
    return max(len(normalize(e).words) for e in entries)


@lru_cache(maxsize=1024)
def _fuzzy_scan_cached(
    words: tuple[str, ...],
    entries: tuple[str, ...],
    tau: float,
    max_ngram: int,
) -> tuple[ScanHit, ...]:
    matcher = _matcher_for(entries)
    hits: list[ScanHit] = []
    for n in range(1, max_ngram + 1):
        for i in range(len(words) - n + 1):
            surface = " ".join(words[i : i + n])
            result = matcher.best(surface, floor=tau, query_norm=surface)
            if result.accepted:
                hits.append(
                    ScanHit(position=i, length=n, surface=surface, canonical=result.canonical, score=result.score)
                )
    hits.sort(key=lambda h: (h.position, -h.score, h.length))
    return tuple(hits)


def fuzzy_scan(
    words: Sequence[str],
    choices: Iterable[str],
    tau: float,
    max_ngram: int | None = None,
) -> list[ScanHit]:
    """Scan token n-grams of normalized words against canonical choices.

    Results are cached: the enhancement flow scans the same transcript with
    the same lexicon several times (deciders, candidate selection, agents).
    """
    entries = tuple(choices)
    if not entries or not words:
        return []
    if max_ngram is None:
        max_ngram = _max_entry_words(entries)
    max_ngram = max(1, min(max_ngram, len(words)))
    return list(_fuzzy_scan_cached(tuple(words), entries, tau, max_ngram))


def jargon_candidates(
    transcript: NormalizedText | str,
    glossary: Mapping[str, str],
    tau_jargon: float = 0.90,
    *,
    roster: Mapping[str, str] | None = None,
    corpus_stats: DocumentFrequencies | None = None,
    top_k: int = DEFAULT_TOP_K,
    stopwords: Iterable[str] | None = None,
) -> list[str]:
    """Glossary terms evidenced by the transcript, in canonical display form.

    Candidates are the union of the top-K terms from the three extractors
    plus the transcript's own token n-grams (which carry position order);
    each candidate must fuzzy-match a glossary entry at tau_jargon.
    Person names never survive.
    """
    if not glossary:
        raise ValueError("glossary must be non-empty")
    norm = transcript if isinstance(transcript, NormalizedText) else normalize(transcript)
    text = norm.joined
    if not norm.words:
        return []

    glossary_displays = list(glossary.values())
    matcher = Matcher(glossary_displays)
    max_n = max(len(k.split()) for k in glossary)

    candidates: list[str] = []
    for hit in fuzzy_scan(norm.words, glossary_displays, tau_jargon, max_ngram=max_n):
        candidates.append(hit.surface)
    if corpus_stats is None:
        corpus_stats = DocumentFrequencies(total_docs=1, df={})
    for extractor_terms in (
        rake_keywords(text, stopwords),
        yake_keywords(text, max_ngram=max_n),
        tfidf_terms(text, corpus_stats),
    ):
        candidates.extend(t.term for t in extractor_terms[:top_k])

    roster_norms = set(roster) if roster else set()
    out: list[str] = []
    seen: set[str] = set()
    for candidate in candidates:
        cand_norm = normalize(candidate).joined
        if not cand_norm or cand_norm in roster_norms:
            continue
        result = matcher.best(candidate, floor=tau_jargon, query_norm=cand_norm)
        if result.accepted and result.canonical not in seen:
            seen.add(result.canonical)
            out.append(result.canonical)
    return out


def _is_capitalized(token: str) -> bool:
    return bool(token) and token[0].isupper()


def person_candidates(
    transcript: str,
    roster: Iterable[str] | None = None,
    tau_match: float = 0.75,
) -> list[str]:
    """Surface spans that look like person names, in transcript order.

    Combines two signals: runs of 1-3 capitalized tokens that do not start a
    sentence, and (when a roster is supplied) token n-grams whose fuzzy
    roster match clears tau_match.
    """
    raw_tokens = _RAW_TOKEN_RE.findall(transcript)
    stripped = [t.strip("\"'().,;:!?-’“”") for t in raw_tokens]

    sentence_start = [True] * len(raw_tokens)
    for i in range(1, len(raw_tokens)):
        sentence_start[i] = raw_tokens[i - 1].rstrip("\"')").endswith((".", "!", "?"))

    found: list[tuple[int, str]] = []
    i = 0
    while i < len(stripped):
        if _is_capitalized(stripped[i]):
            j = i
            while j < len(stripped) and _is_capitalized(stripped[j]):
                j += 1
            run_len = j - i
            if not sentence_start[i] and 1 <= run_len <= 3:
                found.append((i, " ".join(stripped[i:j])))
            i = j
        else:
            i += 1

    if roster is not None:
        norm_words = list(normalize(transcript).words)
        roster_list = tuple(roster)
        if roster_list and norm_words:
            # One extra window token: recognizer errors often split a long
            # name into an additional pseudo-word.
            max_n = min(4, 1 + _max_entry_words(roster_list))
            for hit in fuzzy_scan(norm_words, roster_list, tau_match, max_ngram=max_n):
                # Raw token positions differ from normalized ones; bias the
                # ordering key so heuristic (raw) hits keep their place.
                found.append((hit.position, hit.surface))

    found.sort(key=lambda item: item[0])
    out: list[str] = []
    seen: set[str] = set()
    for _, surface in found:
        key = normalize(surface).joined
        if key and key not in seen:
            seen.add(key)
            out.append(surface)
    return out
