"""Word-level alignment and word error rate.

WER = (substitutions + deletions + insertions) / reference length, computed
on normalized text with uniform edit costs. The alignment backtrace is
deterministic: at equal cost it prefers match, then substitution, then
deletion, then insertion, scanning left to right.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import WerUndefinedError
from .textnorm import normalize


@dataclass(frozen=True)
class WerRecord:
    substitutions: int
    deletions: int
    insertions: int
    reference_length: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def wer(self) -> float:
        return self.errors / self.reference_length


@dataclass(frozen=True)
class AlignOp:
    """One alignment step; ``ref`` / ``hyp`` are None for ins / del."""

    kind: str  # match | sub | del | ins
    ref: str | None
    hyp: str | None


def align(ref: Sequence[str], hyp: Sequence[str]) -> tuple[list[AlignOp], WerRecord]:
    """Minimal-cost word alignment of hypothesis against reference."""
    if not ref:
        raise WerUndefinedError("WER is undefined for an empty reference")
    n, m = len(ref), len(hyp)
    # dist[i][j] = edit distance between ref[i:] and hyp[j:]
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for j in range(m + 1):
        dist[n][j] = m - j
    for i in range(n - 1, -1, -1):
        dist[i][m] = n - i
        row = dist[i]
        below = dist[i + 1]
        for j in range(m - 1, -1, -1):
            if ref[i] == hyp[j]:
                row[j] = below[j + 1]
            else:
                row[j] = 1 + min(below[j + 1], below[j], row[j + 1])

    ops: list[AlignOp] = []
    subs = dels = ins = 0
    i = j = 0
    while i < n or j < m:
        if i < n and j < m and ref[i] == hyp[j] and dist[i][j] == dist[i + 1][j + 1]:
            ops.append(AlignOp("match", ref[i], hyp[j]))
            i += 1
            j += 1
        elif i < n and j < m and dist[i][j] == 1 + dist[i + 1][j + 1]:
            ops.append(AlignOp("sub", ref[i], hyp[j]))
            subs += 1
            i += 1
            j += 1
        elif i < n and dist[i][j] == 1 + dist[i + 1][j]:
            ops.append(AlignOp("del", ref[i], None))
            dels += 1
            i += 1
        else:
            ops.append(AlignOp("ins", None, hyp[j]))
            ins += 1
            j += 1
    record = WerRecord(substitutions=subs, deletions=dels, insertions=ins, reference_length=n)
    return ops, record


def replay(ops: Sequence[AlignOp]) -> list[str]:
    """Apply an alignment's hypothesis side; reproduces hyp from the op list."""
    return [op.hyp for op in ops if op.hyp is not None]


def wer(reference: str, hypothesis: str) -> WerRecord:
    """Normalize both strings, align, and return the error counts."""
    ref_words = normalize(reference).words
    hyp_words = normalize(hypothesis).words
    _, record = align(ref_words, hyp_words)
    return record
