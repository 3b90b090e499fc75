"""Character-level similarity primitives for entity and jargon matching.

The matcher the rest of the package relies on is ``combined_similarity``:
the unweighted mean of normalized edit similarity and Jaro-Winkler,
computed over lowercase normalized forms. Default acceptance thresholds
live in the run configuration (candidate match 0.75, replacement 0.85,
jargon spelling correction 0.90).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .errors import LexiconError
from .textnorm import normalize

# Relative weight of the edit-distance component in combined_similarity.
EDIT_WEIGHT = 0.5

_WINKLER_PREFIX_CAP = 4
_WINKLER_SCALING = 0.1


@dataclass(frozen=True)
class MatchResult:
    query: str
    canonical: str
    score: float
    accepted: bool


def levenshtein(a: str, b: str) -> int:
    """Minimal number of single-character insertions, deletions, substitutions."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost))
        previous = current
    return previous[-1]


def damerau_levenshtein(a: str, b: str) -> int:
    """Optimal-string-alignment distance: Levenshtein plus unit-cost adjacent swaps."""
    if a == b:
        return 0
    rows, cols = len(a) + 1, len(b) + 1
    dist = [[0] * cols for _ in range(rows)]
    for i in range(rows):
        dist[i][0] = i
    for j in range(cols):
        dist[0][j] = j
    for i in range(1, rows):
        for j in range(1, cols):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            best = min(dist[i - 1][j] + 1, dist[i][j - 1] + 1, dist[i - 1][j - 1] + cost)
            if i > 1 and j > 1 and a[i - 1] == b[j - 2] and a[i - 2] == b[j - 1]:
                best = min(best, dist[i - 2][j - 2] + 1)
            dist[i][j] = best
    return dist[-1][-1]


def _jaro(a: str, b: str) -> float:
    if a == b:
        return 1.0
    len_a, len_b = len(a), len(b)
    if not len_a or not len_b:
        return 0.0
    window = max(len_a, len_b) // 2 - 1
    if window < 0:
        window = 0
    a_flags = [False] * len_a
    b_flags = [False] * len_b
    matches = 0
    for i, ch in enumerate(a):
        lo = max(0, i - window)
        hi = min(len_b, i + window + 1)
        for j in range(lo, hi):
            if not b_flags[j] and b[j] == ch:
                a_flags[i] = b_flags[j] = True
                matches += 1
                break
    if matches == 0:
        return 0.0
    transpositions = 0
    k = 0
    for i in range(len_a):
        if not a_flags[i]:
            continue
        while not b_flags[k]:
            k += 1
        if a[i] != b[k]:
            transpositions += 1
        k += 1
    transpositions //= 2
    m = float(matches)
    return (m / len_a + m / len_b + (m - transpositions) / m) / 3.0


def jaro_winkler(a: str, b: str) -> float:
    """Jaro similarity boosted by up to 4 characters of common prefix."""
    jaro = _jaro(a, b)
    prefix = 0
    for ca, cb in zip(a, b):
        if ca != cb or prefix == _WINKLER_PREFIX_CAP:
            break
        prefix += 1
    return jaro + prefix * _WINKLER_SCALING * (1.0 - jaro)


def _combined_on_norm(a: str, b: str) -> float:
    if a == b:
        return 1.0
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    edit_sim = 1.0 - levenshtein(a, b) / longest
    return EDIT_WEIGHT * edit_sim + (1.0 - EDIT_WEIGHT) * jaro_winkler(a, b)


def combined_similarity(a: str, b: str) -> float:
    """Mean of normalized edit similarity and Jaro-Winkler on normalized forms."""
    return _combined_on_norm(normalize(a).joined, normalize(b).joined)


def _candidate_forms(canonical_norm: str) -> list[str]:
    # Two-token names also score against the swapped ordering: commentary
    # frequently drops or reorders first names.
    tokens = canonical_norm.split()
    if len(tokens) == 2:
        return [canonical_norm, f"{tokens[1]} {tokens[0]}"]
    return [canonical_norm]


def similarity_to(query: str, canonical: str) -> float:
    """combined_similarity with the two-token permutation pass applied."""
    query_norm = normalize(query).joined
    return max(
        _combined_on_norm(query_norm, form)
        for form in _candidate_forms(normalize(canonical).joined)
    )


class Matcher:
    """Choices prepared for repeated best-match queries.

    Precomputes normalized forms (plus the swapped ordering for two-token
    names) and prunes candidates whose length difference already caps the
    combined score below the floor.
    """

    def __init__(self, choices: Iterable[str]):
        self._entries: list[tuple[str, str, list[str]]] = []
        for display in choices:
            norm = normalize(display).joined
            self._entries.append((display, norm, _candidate_forms(norm)))
        if not self._entries:
            raise LexiconError("best_match requires a non-empty lexicon")

    def best(self, query: str, *, floor: float = 0.0, query_norm: str | None = None) -> MatchResult:
        if query_norm is None:
            query_norm = normalize(query).joined
        qlen = len(query_norm)
        best_score = -1.0
        best_key: tuple[float, int, str] | None = None
        best_display = ""
        for display, norm, forms in self._entries:
            score = 0.0
            for form in forms:
                longest = max(qlen, len(form))
                if longest:
                    # combined <= 0.5 * (1 - |len gap| / longest) + 0.5, so a
                    # form whose bound is below the current best cannot win.
                    bound = 0.5 * (1.0 - abs(qlen - len(form)) / longest) + 0.5
                    if bound < best_score:
                        continue
                score = max(score, _combined_on_norm(query_norm, form))
            key = (-score, len(norm), norm)
            if best_key is None or key < best_key:
                best_key = key
                best_score = score
                best_display = display
        return MatchResult(query=query, canonical=best_display, score=best_score, accepted=best_score >= floor)


def best_match(query: str, choices: Iterable[str], tau: float) -> MatchResult:
    """Best-scoring canonical entry for a query string.

    ``choices`` are canonical display forms. Ties break toward the shorter
    normalized form, then lexicographically, so the winner is deterministic.
    Raises LexiconError when there is nothing to match against.
    """
    return Matcher(choices).best(query, floor=tau)
