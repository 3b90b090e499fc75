"""Operator command line.

Exit-code policy: infrastructure problems (bad config, missing files,
unreadable manifests) exit nonzero; per-segment ASR or agent failures are
recorded in the run artifact and the command still exits 0, because batch
jobs must complete.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import click

from . import evaluation, pipeline
from .config import (
    RunConfig,
    build_backend,
    build_chat_client,
    build_context,
    build_lexicon,
    load_config,
)
from .errors import RepassError

VARIANT_CHOICES = click.Choice(pipeline.VARIANTS)


def _load(config_path: str, seed: int | None, workers: int | None) -> RunConfig:
    config = load_config(config_path)
    if seed is not None:
        config = dataclasses.replace(
            config,
            seed=seed,
            backend=dataclasses.replace(
                config.backend,
                corruption=dataclasses.replace(config.backend.corruption, rng_seed=seed),
            ),
        )
    if workers is not None:
        config = dataclasses.replace(config, workers=workers)
    return config


def _echo_progress(index: int, total: int, result: pipeline.SegmentResult) -> None:
    status = "failed" if result.failed else (result.fallback_reason or ("enhanced" if result.accepted else "baseline"))
    click.echo(f"[{index}/{total}] {result.segment_id}: {status}")


def _run_variant(
    config: RunConfig,
    segments: list[pipeline.Segment],
    variant: str,
    out_dir: Path,
    quiet: bool = False,
) -> tuple[list[pipeline.SegmentResult], Path]:
    lexicon = build_lexicon(config)
    backend = build_backend(config, lexicon)
    client = build_chat_client(config, lexicon) if variant != "baseline" else None
    ctx = build_context(config, lexicon)
    artifact = out_dir / f"{variant}.run.jsonl"
    results = pipeline.run_corpus(
        variant,
        segments,
        backend,
        client,
        ctx,
        workers=config.workers,
        artifact_path=artifact,
        seed=config.seed,
        progress=None if quiet else _echo_progress,
    )
    return results, artifact


@click.group()
def main() -> None:
    """Second-pass transcript enhancement, evaluation, and simulation."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(), help="Run config YAML.")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(), help="Segment manifest (JSONL).")
@click.option("--variant", type=VARIANT_CHOICES, default="baseline", show_default=True)
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Output directory (default: config out_dir).")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--workers", type=int, default=None, help="Override the config worker count.")
def transcribe(config_path, manifest_path, variant, out_dir, seed, workers) -> None:
    """Run one pipeline variant over a manifest and write the run artifact."""
    try:
        config = _load(config_path, seed, workers)
        segments = pipeline.read_manifest(manifest_path)
        out = Path(out_dir or config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _, artifact = _run_variant(config, segments, variant, out)
    except RepassError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"run artifact written to {artifact}")


@main.command("eval")
@click.option("--run", "run_path", required=True, type=click.Path(), help="Run artifact (JSONL).")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(), help="Manifest with ground truths.")
@click.option("--out", "out_path", type=click.Path(), default=None, help="Score file (default: <run>.scores.jsonl).")
def eval_cmd(run_path, manifest_path, out_path) -> None:
    """Score a run artifact against ground truths; write per-segment WERs."""
    try:
        _, results = pipeline.read_run_artifact(run_path)
        segments = pipeline.read_manifest(manifest_path)
        scores = evaluation.score_run(results, segments)
        out = Path(out_path) if out_path else Path(run_path).with_suffix("").with_suffix(".scores.jsonl")
        evaluation.write_scores(out, scores)
    except RepassError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"scored {len(scores)} segments -> {out}")


@main.command()
@click.option("--baseline", "baseline_path", required=True, type=click.Path(), help="Baseline score file.")
@click.option("--variant", "variant_path", required=True, type=click.Path(), help="Variant score file.")
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Directory for report files.")
def compare(baseline_path, variant_path, out_dir) -> None:
    """Paired comparison of two score files; prints the summary table."""
    try:
        base_scores = evaluation.read_scores(baseline_path)
        var_scores = evaluation.read_scores(variant_path)
        report = evaluation.compare(
            base_scores,
            var_scores,
            baseline_name=Path(baseline_path).stem.split(".")[0],
            variant_name=Path(variant_path).stem.split(".")[0],
        )
    except RepassError as exc:
        raise click.ClickException(str(exc)) from exc
    table = evaluation.render_report(report, "table")
    click.echo(table)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        name = f"{report.baseline_name}_vs_{report.variant_name}"
        (out / f"{name}.txt").write_text(table + "\n", encoding="utf-8")
        (out / f"{name}.jsonl").write_text(evaluation.render_report(report, "machine"), encoding="utf-8")
        click.echo(f"report files written to {out}")


def materialize_truths(segments: list[pipeline.Segment], out_dir: Path) -> list[pipeline.Segment]:
    """Write ground truths as text files the mock backend can transcribe."""
    truth_dir = out_dir / "truths"
    truth_dir.mkdir(parents=True, exist_ok=True)
    rewritten: list[pipeline.Segment] = []
    for segment in segments:
        if segment.ground_truth is None:
            raise RepassError(f"segment {segment.segment_id} has no ground truth; simulation needs one")
        path = truth_dir / f"{segment.segment_id}.txt"
        path.write_text(segment.ground_truth, encoding="utf-8")
        rewritten.append(dataclasses.replace(segment, audio_ref=str(path)))
    return rewritten


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(), help="Run config YAML (mock backend).")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(), help="Truth manifest (JSONL).")
@click.option("--variants", default="p3,p4", show_default=True, help="Comma-separated variants to simulate.")
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--workers", type=int, default=None)
def simulate(config_path, manifest_path, variants, out_dir, seed, workers) -> None:
    """Synthesize corrupted baselines from truths and compare variants end to end."""
    try:
        config = _load(config_path, seed, workers)
        if config.backend.kind != "mock":
            raise click.ClickException("simulate requires a mock backend in the config")
        wanted = [v.strip() for v in variants.split(",") if v.strip()]
        for v in wanted:
            if v not in pipeline.VARIANTS or v == "baseline":
                raise click.ClickException(f"cannot simulate variant {v!r}")
        segments = pipeline.read_manifest(manifest_path)
        out = Path(out_dir or config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        segments = materialize_truths(segments, out)

        baseline_results, _ = _run_variant(config, segments, "baseline", out, quiet=True)
        baseline_scores = evaluation.score_run(baseline_results, segments)
        evaluation.write_scores(out / "baseline.scores.jsonl", baseline_scores)
        click.echo(f"baseline mean WER: {_mean([s.wer for s in baseline_scores]):.3f}")

        for variant in wanted:
            results, _ = _run_variant(config, segments, variant, out, quiet=True)
            scores = evaluation.score_run(results, segments)
            evaluation.write_scores(out / f"{variant}.scores.jsonl", scores)
            report = evaluation.compare(baseline_scores, scores, variant_name=variant)
            table = evaluation.render_report(report, "table")
            (out / f"baseline_vs_{variant}.txt").write_text(table + "\n", encoding="utf-8")
            (out / f"baseline_vs_{variant}.jsonl").write_text(
                evaluation.render_report(report, "machine"), encoding="utf-8"
            )
            click.echo("")
            click.echo(table)
    except RepassError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"\nsimulation outputs written to {out}")


def _mean(values: list[float]) -> float:
    return sum(values) / len(values) if values else 0.0


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(), help="Run config YAML.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8731, show_default=True)
def serve(config_path, host, port) -> None:
    """Serve the enhancement API over HTTP."""
    import uvicorn

    from .service import create_app

    try:
        config = load_config(config_path)
        app = create_app(config)
    except RepassError as exc:
        raise click.ClickException(str(exc)) from exc
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
