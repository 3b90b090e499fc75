"""Two-pass enhancement variants and corpus orchestration.

Variant map:
  baseline  single pass, no prompt
  p1        second pass prompted with the topic label alone
  p2        transcript edited directly by the fix agent; no second pass
  p3        second pass prompted with topic + validated names (no deciders)
  p4        full flow: deciders gate name and jargon injection; the two
            branches run independently and merge at the sentence builder

Safety rule: the reported transcript is always either the baseline or an
enhancement that passed the length safeguard. Error policy for p4: topic
failures and transport failures of the name/jargon extraction degrade a
segment to its baseline; decider parse failures count as NO (no injection);
the sentence builder can always fall back to its template.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .agents import (
    ChatClient,
    best_candidates,
    fix_agent,
    jargon_agent,
    jargon_decider,
    ner_agent,
    ner_decider,
    sentence_builder,
    topic_agent,
)
from .asr import AsrBackend
from .errors import ChatClientError, ManifestError, VerdictParseError
from .lexicon import Lexicon
from .promptbuild import ContextPrompt, TokenBudget, build_prompt, count_tokens
from .stringsim import combined_similarity
from .textnorm import normalize

logger = logging.getLogger(__name__)

VARIANTS = ("baseline", "p1", "p2", "p3", "p4")

FALLBACK_LENGTH = "length_safeguard"
FALLBACK_DECIDER = "decider_no"
FALLBACK_AGENT = "agent_failure"
FALLBACK_DOMAIN = "out_of_domain"


@dataclass(frozen=True)
class Segment:
    segment_id: str
    audio_ref: str
    ground_truth: str | None = None


@dataclass(frozen=True)
class SegmentResult:
    segment_id: str
    baseline_transcript: str
    prompt_used: ContextPrompt | None
    enhanced_transcript: str
    accepted: bool
    fallback_reason: str | None = None
    failed: bool = False
    error: str | None = None


@dataclass(frozen=True)
class EnhanceContext:
    """Everything the enhancement variants need besides backend and client."""

    lexicon: Lexicon
    budget: TokenBudget = field(default_factory=TokenBudget)
    domain_label: str = ""
    fallback_topic: str = ""
    tau_match: float = 0.75
    tau_replace: float = 0.85
    tau_jargon: float = 0.90
    out_of_domain_min: float = 0.60


def read_manifest(path: str | Path) -> list[Segment]:
    p = Path(path)
    if not p.is_file():
        raise ManifestError(f"manifest not found: {p}")
    segments: list[Segment] = []
    seen: set[str] = set()
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            segment = Segment(
                segment_id=str(record["segment_id"]),
                audio_ref=str(record["audio_ref"]),
                ground_truth=record.get("ground_truth"),
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ManifestError(f"bad manifest record at {p}:{lineno}") from exc
        if segment.segment_id in seen:
            raise ManifestError(f"duplicate segment_id {segment.segment_id!r} at {p}:{lineno}")
        seen.add(segment.segment_id)
        segments.append(segment)
    return segments


def length_safeguard(baseline: str, enhanced: str) -> bool:
    """Accept iff the enhancement keeps at least 80% of the baseline's words.

    The boundary is inclusive and the comparison exact (5*enhanced >=
    4*baseline on normalized word counts), so a ratio of exactly 0.80
    accepts. An empty baseline accepts vacuously.
    """
    base_count = len(normalize(baseline).words)
    if base_count == 0:
        return True
    return 5 * len(normalize(enhanced).words) >= 4 * base_count


def _baseline_result(segment: Segment, baseline: str, reason: str | None = None) -> SegmentResult:
    return SegmentResult(
        segment_id=segment.segment_id,
        baseline_transcript=baseline,
        prompt_used=None,
        enhanced_transcript=baseline,
        accepted=False,
        fallback_reason=reason,
    )


def _second_pass(
    backend: AsrBackend,
    segment: Segment,
    baseline: str,
    prompt: ContextPrompt,
) -> SegmentResult:
    enhanced = backend.transcribe(segment.audio_ref, prompt.text)
    if length_safeguard(baseline, enhanced):
        return SegmentResult(
            segment_id=segment.segment_id,
            baseline_transcript=baseline,
            prompt_used=prompt,
            enhanced_transcript=enhanced,
            accepted=True,
        )
    return SegmentResult(
        segment_id=segment.segment_id,
        baseline_transcript=baseline,
        prompt_used=prompt,
        enhanced_transcript=baseline,
        accepted=False,
        fallback_reason=FALLBACK_LENGTH,
    )


def _resolve_topic(client: ChatClient, baseline: str, ctx: EnhanceContext) -> tuple[str | None, str | None]:
    result = topic_agent(client, baseline, fallback_topic=ctx.fallback_topic)
    if result.fallback:
        return None, FALLBACK_AGENT
    if ctx.domain_label and combined_similarity(result.topic, ctx.domain_label) < ctx.out_of_domain_min:
        return None, FALLBACK_DOMAIN
    return result.topic, None


def _topic_prompt(topic: str, budget: TokenBudget) -> ContextPrompt:
    return ContextPrompt(text=topic, token_count=count_tokens(topic, budget), topic=topic)


def run_baseline(backend: AsrBackend, segment: Segment) -> SegmentResult:
    baseline = backend.transcribe(segment.audio_ref, None)
    return _baseline_result(segment, baseline)


def run_p1(backend: AsrBackend, client: ChatClient, segment: Segment, ctx: EnhanceContext) -> SegmentResult:
    """Topic label used directly as the decoding prompt."""
    baseline = backend.transcribe(segment.audio_ref, None)
    topic, reason = _resolve_topic(client, baseline, ctx)
    if topic is None:
        return _baseline_result(segment, baseline, reason)
    return _second_pass(backend, segment, baseline, _topic_prompt(topic, ctx.budget))


def run_p2(backend: AsrBackend, client: ChatClient, segment: Segment, ctx: EnhanceContext) -> SegmentResult:
    """Direct transcript edit; no prompt and no second recognizer pass."""
    baseline = backend.transcribe(segment.audio_ref, None)
    edited = fix_agent(client, baseline)
    if not length_safeguard(baseline, edited):
        return _baseline_result(segment, baseline, FALLBACK_LENGTH)
    return SegmentResult(
        segment_id=segment.segment_id,
        baseline_transcript=baseline,
        prompt_used=None,
        enhanced_transcript=edited,
        accepted=True,
    )


def run_p3(backend: AsrBackend, client: ChatClient, segment: Segment, ctx: EnhanceContext) -> SegmentResult:
    """Topic prompt augmented with validated candidate names, no deciders."""
    baseline = backend.transcribe(segment.audio_ref, None)
    topic, reason = _resolve_topic(client, baseline, ctx)
    if topic is None:
        return _baseline_result(segment, baseline, reason)
    try:
        names = ner_agent(client, baseline, topic, ctx.lexicon, tau_replace=ctx.tau_replace)
    except ChatClientError as exc:
        logger.warning("segment %s: ner agent failed (%s)", segment.segment_id, exc)
        return _baseline_result(segment, baseline, FALLBACK_AGENT)
    if not names:
        prompt = _topic_prompt(topic, ctx.budget)
    else:
        prompt = build_prompt(
            topic,
            names,
            [],
            ctx.budget,
            lambda t, n, j: sentence_builder(client, t, n, j),
        )
    return _second_pass(backend, segment, baseline, prompt)


def run_p4(backend: AsrBackend, client: ChatClient, segment: Segment, ctx: EnhanceContext) -> SegmentResult:
    """Full multi-agent flow with conservative decider gating.

    When both deciders come back NO there is no second recognizer call at
    all; the segment keeps its baseline transcript.
    """
    baseline = backend.transcribe(segment.audio_ref, None)
    topic, reason = _resolve_topic(client, baseline, ctx)
    if topic is None:
        return _baseline_result(segment, baseline, reason)

    try:
        names_verdict = ner_decider(client, baseline, ctx.lexicon, tau_match=ctx.tau_match)
    except (VerdictParseError, ChatClientError) as exc:
        logger.warning("segment %s: ner decider failed, treating as NO (%s)", segment.segment_id, exc)
        names_verdict = None
    names: list[str] = []
    if names_verdict is not None and names_verdict.yes:
        try:
            names = best_candidates(client, baseline, ctx.lexicon, tau_replace=ctx.tau_replace)
        except ChatClientError as exc:
            logger.warning("segment %s: candidate selector failed, skipping names (%s)", segment.segment_id, exc)

    try:
        jargon_list = jargon_agent(client, baseline, topic, ctx.lexicon, tau_jargon=ctx.tau_jargon)
    except ChatClientError as exc:
        logger.warning("segment %s: jargon agent failed, skipping jargon (%s)", segment.segment_id, exc)
        jargon_list = []
    try:
        jargon_verdict = jargon_decider(client, baseline, topic, jargon_list, ctx.budget)
    except (VerdictParseError, ChatClientError) as exc:
        logger.warning("segment %s: jargon decider failed, treating as NO (%s)", segment.segment_id, exc)
        jargon_verdict = None

    inject_names = names if names else []
    inject_jargon = jargon_list if (jargon_verdict is not None and jargon_verdict.yes) else []
    if not inject_names and not inject_jargon:
        return _baseline_result(segment, baseline, FALLBACK_DECIDER)

    prompt = build_prompt(
        topic,
        inject_names,
        inject_jargon,
        ctx.budget,
        lambda t, n, j: sentence_builder(client, t, n, j),
    )
    return _second_pass(backend, segment, baseline, prompt)


_VariantFn = Callable[[AsrBackend, ChatClient, Segment, EnhanceContext], SegmentResult]

_VARIANT_FNS: dict[str, _VariantFn] = {
    "p1": run_p1,
    "p2": run_p2,
    "p3": run_p3,
    "p4": run_p4,
}


def run_segment(
    variant: str,
    backend: AsrBackend,
    client: ChatClient | None,
    segment: Segment,
    ctx: EnhanceContext,
) -> SegmentResult:
    if variant == "baseline":
        return run_baseline(backend, segment)
    if variant not in _VARIANT_FNS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if client is None:
        raise ValueError(f"variant {variant!r} requires a chat client")
    return _VARIANT_FNS[variant](backend, client, segment, ctx)


def run_corpus(
    variant: str,
    segments: list[Segment],
    backend: AsrBackend,
    client: ChatClient | None,
    ctx: EnhanceContext,
    *,
    workers: int = 1,
    artifact_path: str | Path | None = None,
    seed: int | None = None,
    progress: Callable[[int, int, SegmentResult], None] | None = None,
) -> list[SegmentResult]:
    """All segments through one variant; output order follows the manifest.

    Per-segment failures are recorded and the run completes. When an
    artifact path is given, the per-segment records (prompts, transcripts,
    fallback reasons) are written there for audit.
    """

    def one(segment: Segment) -> SegmentResult:
        try:
            return run_segment(variant, backend, client, segment, ctx)
        except Exception as exc:  # per-segment isolation: record and continue
            logger.warning("segment %s failed: %s", segment.segment_id, exc)
            return SegmentResult(
                segment_id=segment.segment_id,
                baseline_transcript="",
                prompt_used=None,
                enhanced_transcript="",
                accepted=False,
                failed=True,
                error=f"{type(exc).__name__}: {exc}",
            )

    if workers > 1 and len(segments) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, segments))
    else:
        results = [one(segment) for segment in segments]

    if progress is not None:
        for idx, result in enumerate(results, start=1):
            progress(idx, len(results), result)
    if artifact_path is not None:
        write_run_artifact(artifact_path, variant, results, seed=seed)
    return results


# ---------------------------------------------------------------------------
# Run artifact I/O (line-delimited JSON; byte-stable across reruns)
# ---------------------------------------------------------------------------


def _dump(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def _prompt_to_dict(prompt: ContextPrompt | None) -> dict | None:
    if prompt is None:
        return None
    return {
        "text": prompt.text,
        "tokens": prompt.token_count,
        "topic": prompt.topic,
        "names": list(prompt.names),
        "jargon": list(prompt.jargon),
    }


def _prompt_from_dict(data: dict | None) -> ContextPrompt | None:
    if data is None:
        return None
    return ContextPrompt(
        text=data["text"],
        token_count=data["tokens"],
        topic=data["topic"],
        names=tuple(data["names"]),
        jargon=tuple(data["jargon"]),
    )


def write_run_artifact(
    path: str | Path,
    variant: str,
    results: list[SegmentResult],
    seed: int | None = None,
) -> None:
    lines = [_dump({"record": "header", "variant": variant, "seed": seed, "segments": len(results)})]
    for result in results:
        lines.append(
            _dump(
                {
                    "record": "segment",
                    "segment_id": result.segment_id,
                    "baseline": result.baseline_transcript,
                    "prompt": _prompt_to_dict(result.prompt_used),
                    "enhanced": result.enhanced_transcript,
                    "accepted": result.accepted,
                    "fallback_reason": result.fallback_reason,
                    "failed": result.failed,
                    "error": result.error,
                }
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_run_artifact(path: str | Path) -> tuple[dict, list[SegmentResult]]:
    p = Path(path)
    if not p.is_file():
        raise ManifestError(f"run artifact not found: {p}")
    header: dict = {}
    results: list[SegmentResult] = []
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            kind = record["record"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ManifestError(f"bad artifact record at {p}:{lineno}") from exc
        if kind == "header":
            header = record
        elif kind == "segment":
            try:
                results.append(
                    SegmentResult(
                        segment_id=record["segment_id"],
                        baseline_transcript=record["baseline"],
                        prompt_used=_prompt_from_dict(record["prompt"]),
                        enhanced_transcript=record["enhanced"],
                        accepted=record["accepted"],
                        fallback_reason=record["fallback_reason"],
                        failed=record["failed"],
                        error=record["error"],
                    )
                )
            except (KeyError, TypeError) as exc:
                raise ManifestError(f"bad artifact record at {p}:{lineno}") from exc
        else:
            raise ManifestError(f"unknown artifact record type {kind!r} at {p}:{lineno}")
    return header, results
