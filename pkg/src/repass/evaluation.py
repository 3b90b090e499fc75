"""Corpus-level scoring, paired statistics, and report rendering.

The paired test is the Wilcoxon signed-rank with zero-drop handling and
average ranks on ties: exact two-sided p by full sign enumeration up to 12
effective pairs, normal approximation with tie and continuity corrections
beyond that. Effect size is the matched-pairs rank-biserial correlation
r = (W+ - W-) / (W+ + W-).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import ScoreMismatchError
from .pipeline import Segment, SegmentResult
from .wer import WerRecord, wer

logger = logging.getLogger(__name__)

EXACT_ENUMERATION_MAX_N = 12


@dataclass(frozen=True)
class SegmentScore:
    segment_id: str
    record: WerRecord

    @property
    def wer(self) -> float:
        return self.record.wer


@dataclass(frozen=True)
class PairedScore:
    segment_id: str
    wer_baseline: float
    wer_variant: float

    @property
    def delta(self) -> float:
        return self.wer_variant - self.wer_baseline


@dataclass(frozen=True)
class WilcoxonResult:
    w: float
    p_value: float
    n_effective: int


@dataclass(frozen=True)
class ComparisonReport:
    per_segment: tuple[PairedScore, ...]
    mean_baseline: float
    sd_baseline: float
    mean_variant: float
    sd_variant: float
    improved: int
    degraded: int
    unchanged: int
    w_statistic: float
    p_value: float
    n_effective: int
    effect_size: float
    effect_size_defined: bool
    baseline_name: str = field(default="baseline", compare=False)
    variant_name: str = field(default="variant", compare=False)

    @property
    def evaluated(self) -> int:
        return len(self.per_segment)

    def share(self, count: int) -> float:
        return count / self.evaluated if self.evaluated else 0.0


def score_run(results: Sequence[SegmentResult], segments: Sequence[Segment]) -> list[SegmentScore]:
    """WER of each final reported transcript against its ground truth.

    Failed segments and segments without ground truth are excluded with a
    warning.
    """
    truths = {segment.segment_id: segment.ground_truth for segment in segments}
    scores: list[SegmentScore] = []
    for result in results:
        if result.failed:
            logger.warning("segment %s failed during the run; excluded from scoring", result.segment_id)
            continue
        truth = truths.get(result.segment_id)
        if truth is None:
            logger.warning("segment %s has no ground truth; excluded from scoring", result.segment_id)
            continue
        scores.append(SegmentScore(result.segment_id, wer(truth, result.enhanced_transcript)))
    return scores


def _average_ranks(magnitudes: Sequence[float]) -> list[float]:
    order = sorted(range(len(magnitudes)), key=lambda i: magnitudes[i])
    ranks = [0.0] * len(magnitudes)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and magnitudes[order[j + 1]] == magnitudes[order[i]]:
            j += 1
        average = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = average
        i = j + 1
    return ranks


def _normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def wilcoxon_signed_rank(deltas: Iterable[float]) -> WilcoxonResult:
    """Two-sided signed-rank test on paired deltas; zeros dropped."""
    nonzero = [d for d in deltas if d != 0.0]
    n = len(nonzero)
    if n == 0:
        return WilcoxonResult(w=0.0, p_value=1.0, n_effective=0)
    ranks = _average_ranks([abs(d) for d in nonzero])
    w_plus = sum(rank for rank, d in zip(ranks, nonzero) if d > 0)
    w_minus = sum(rank for rank, d in zip(ranks, nonzero) if d < 0)
    w = min(w_plus, w_minus)

    if n <= EXACT_ENUMERATION_MAX_N:
        # Average ranks are multiples of 1/2; doubling gives exact integers.
        ranks2 = [int(round(2 * r)) for r in ranks]
        total2 = sum(ranks2)
        w2 = min(int(round(2 * w_plus)), int(round(2 * w_minus)))
        at_most = 0
        for mask in range(1 << n):
            s_plus = 0
            for i in range(n):
                if mask >> i & 1:
                    s_plus += ranks2[i]
            if min(s_plus, total2 - s_plus) <= w2:
                at_most += 1
        return WilcoxonResult(w=w, p_value=at_most / (1 << n), n_effective=n)

    mean = n * (n + 1) / 4.0
    tie_term = 0.0
    seen: dict[float, int] = {}
    for d in nonzero:
        seen[abs(d)] = seen.get(abs(d), 0) + 1
    for count in seen.values():
        tie_term += count**3 - count
    variance = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term / 48.0
    if variance <= 0:
        return WilcoxonResult(w=w, p_value=1.0, n_effective=n)
    z = (w - mean + 0.5) / math.sqrt(variance)
    p = min(1.0, 2.0 * _normal_cdf(z))
    return WilcoxonResult(w=w, p_value=max(p, 1e-300), n_effective=n)


def rank_biserial_effect_size(deltas: Iterable[float]) -> tuple[float, bool]:
    """Matched-pairs rank-biserial r in [-1, 1]; (0.0, False) when all deltas are zero."""
    nonzero = [d for d in deltas if d != 0.0]
    if not nonzero:
        return 0.0, False
    ranks = _average_ranks([abs(d) for d in nonzero])
    w_plus = sum(rank for rank, d in zip(ranks, nonzero) if d > 0)
    w_minus = sum(rank for rank, d in zip(ranks, nonzero) if d < 0)
    return (w_plus - w_minus) / (w_plus + w_minus), True


def _mean_sd(values: Sequence[float]) -> tuple[float, float]:
    if not values:
        return 0.0, 0.0
    mean = sum(values) / len(values)
    if len(values) < 2:
        return mean, 0.0
    variance = sum((v - mean) ** 2 for v in values) / (len(values) - 1)
    return mean, math.sqrt(variance)


def compare(
    baseline_scores: Sequence[SegmentScore] | Sequence[tuple[str, float]],
    variant_scores: Sequence[SegmentScore] | Sequence[tuple[str, float]],
    *,
    baseline_name: str = "baseline",
    variant_name: str = "variant",
) -> ComparisonReport:
    """Paired baseline-vs-variant statistics over matching segment ids."""

    def as_map(scores) -> dict[str, float]:
        out: dict[str, float] = {}
        for item in scores:
            if isinstance(item, SegmentScore):
                out[item.segment_id] = item.wer
            else:
                segment_id, value = item
                out[segment_id] = float(value)
        return out

    base = as_map(baseline_scores)
    var = as_map(variant_scores)
    missing = sorted(set(base) - set(var))
    extra = sorted(set(var) - set(base))
    if missing or extra:
        raise ScoreMismatchError(
            f"score lists cover different segments; only in {baseline_name}: {missing}; "
            f"only in {variant_name}: {extra}"
        )

    pairs = tuple(PairedScore(sid, base[sid], var[sid]) for sid in base)
    deltas = [p.delta for p in pairs]
    improved = sum(1 for d in deltas if d < 0)
    degraded = sum(1 for d in deltas if d > 0)
    unchanged = len(deltas) - improved - degraded
    mean_b, sd_b = _mean_sd([p.wer_baseline for p in pairs])
    mean_v, sd_v = _mean_sd([p.wer_variant for p in pairs])
    wilcoxon = wilcoxon_signed_rank(deltas)
    effect, effect_defined = rank_biserial_effect_size(deltas)
    return ComparisonReport(
        per_segment=pairs,
        mean_baseline=mean_b,
        sd_baseline=sd_b,
        mean_variant=mean_v,
        sd_variant=sd_v,
        improved=improved,
        degraded=degraded,
        unchanged=unchanged,
        w_statistic=wilcoxon.w,
        p_value=wilcoxon.p_value,
        n_effective=wilcoxon.n_effective,
        effect_size=effect,
        effect_size_defined=effect_defined,
        baseline_name=baseline_name,
        variant_name=variant_name,
    )


def _fmt_count(count: int, total: int) -> str:
    pct = 100.0 * count / total if total else 0.0
    return f"{count} ({pct:.1f}%)"


def render_report(report: ComparisonReport, fmt: str = "table") -> str:
    """Human table or machine-readable line-delimited rows."""
    if fmt == "table":
        n = report.evaluated
        lines = [
            f"Paired comparison over {n} segments",
            f"{'run':<12}{'mean WER ± SD':<20}{'improved':<16}{'degraded':<16}{'unchanged':<16}",
            f"{report.baseline_name:<12}{f'{report.mean_baseline:.3f} ± {report.sd_baseline:.3f}':<20}"
            f"{'—':<16}{'—':<16}{'—':<16}",
            f"{report.variant_name:<12}{f'{report.mean_variant:.3f} ± {report.sd_variant:.3f}':<20}"
            f"{_fmt_count(report.improved, n):<16}{_fmt_count(report.degraded, n):<16}"
            f"{_fmt_count(report.unchanged, n):<16}",
        ]
        effect = f"{report.effect_size:+.3f}" if report.effect_size_defined else "undefined (all deltas zero)"
        lines.append(
            f"Wilcoxon signed-rank: W={report.w_statistic:g}, n_eff={report.n_effective}, "
            f"p={report.p_value:.4g}; rank-biserial effect size: {effect}"
        )
        return "\n".join(lines)
    if fmt == "machine":
        rows = [
            json.dumps(
                {
                    "record": "summary",
                    "baseline_name": report.baseline_name,
                    "variant_name": report.variant_name,
                    "mean_baseline": report.mean_baseline,
                    "sd_baseline": report.sd_baseline,
                    "mean_variant": report.mean_variant,
                    "sd_variant": report.sd_variant,
                    "improved": report.improved,
                    "degraded": report.degraded,
                    "unchanged": report.unchanged,
                    "w_statistic": report.w_statistic,
                    "p_value": report.p_value,
                    "n_effective": report.n_effective,
                    "effect_size": report.effect_size,
                    "effect_size_defined": report.effect_size_defined,
                },
                sort_keys=True,
                separators=(",", ":"),
            )
        ]
        for pair in report.per_segment:
            rows.append(
                json.dumps(
                    {
                        "record": "segment",
                        "segment_id": pair.segment_id,
                        "wer_baseline": pair.wer_baseline,
                        "wer_variant": pair.wer_variant,
                        "delta": pair.delta,
                    },
                    sort_keys=True,
                    separators=(",", ":"),
                )
            )
        return "\n".join(rows) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def write_scores(path, scores: Sequence[SegmentScore]) -> None:
    """Per-segment WER file: one JSON row per scored segment."""
    from pathlib import Path

    lines = [
        json.dumps(
            {
                "segment_id": s.segment_id,
                "wer": s.record.wer,
                "substitutions": s.record.substitutions,
                "deletions": s.record.deletions,
                "insertions": s.record.insertions,
                "reference_length": s.record.reference_length,
            },
            sort_keys=True,
            separators=(",", ":"),
        )
        for s in scores
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_scores(path) -> list[tuple[str, float]]:
    """Score file rows as (segment_id, wer) pairs."""
    from pathlib import Path

    p = Path(path)
    if not p.is_file():
        raise ScoreMismatchError(f"score file not found: {p}")
    out: list[tuple[str, float]] = []
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            out.append((str(record["segment_id"]), float(record["wer"])))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ScoreMismatchError(f"bad score record at {p}:{lineno}") from exc
    return out


def parse_machine_report(text: str) -> ComparisonReport:
    """Inverse of render_report(..., "machine")."""
    summary: dict | None = None
    pairs: list[PairedScore] = []
    for line in text.splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        if record["record"] == "summary":
            summary = record
        elif record["record"] == "segment":
            pairs.append(
                PairedScore(
                    segment_id=record["segment_id"],
                    wer_baseline=record["wer_baseline"],
                    wer_variant=record["wer_variant"],
                )
            )
    if summary is None:
        raise ValueError("machine report has no summary record")
    return ComparisonReport(
        per_segment=tuple(pairs),
        mean_baseline=summary["mean_baseline"],
        sd_baseline=summary["sd_baseline"],
        mean_variant=summary["mean_variant"],
        sd_variant=summary["sd_variant"],
        improved=summary["improved"],
        degraded=summary["degraded"],
        unchanged=summary["unchanged"],
        w_statistic=summary["w_statistic"],
        p_value=summary["p_value"],
        n_effective=summary["n_effective"],
        effect_size=summary["effect_size"],
        effect_size_defined=summary["effect_size_defined"],
        baseline_name=summary["baseline_name"],
        variant_name=summary["variant_name"],
    )
