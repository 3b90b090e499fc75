"""HTTP service wrapping the core package for long-running, multi-client use.

The lexicon, backend, and chat client are built once at startup from a run
config. `/asr/transcribe` implements the same wire contract the HTTP
backend client speaks (JSON body with `audio`, optional `initial_prompt`,
optional `model`; response `{"text": ...}`), so a mock-configured service
doubles as a transcription stub for integration tests and demos.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import evaluation
from .config import RunConfig, build_backend, build_chat_client, build_context, build_lexicon
from .errors import RepassError, WerUndefinedError
from .pipeline import Segment, run_segment
from .promptbuild import build_prompt
from .agents import sentence_builder
from .stringsim import best_match
from .textnorm import normalize
from .wer import wer


class NormalizeRequest(BaseModel):
    text: str


class NormalizeResponse(BaseModel):
    words: list[str]
    joined: str


class WerRequest(BaseModel):
    reference: str
    hypothesis: str


class WerResponse(BaseModel):
    substitutions: int
    deletions: int
    insertions: int
    reference_length: int
    wer: float


class MatchRequest(BaseModel):
    query: str
    pool: str = Field(default="names", pattern="^(names|jargon)$")
    tau: float | None = None


class MatchResponse(BaseModel):
    query: str
    canonical: str
    score: float
    accepted: bool


class PromptRequest(BaseModel):
    topic: str
    names: list[str] = []
    jargon: list[str] = []


class PromptResponse(BaseModel):
    text: str
    token_count: int
    topic: str
    names: list[str]
    jargon: list[str]


class TranscribeRequest(BaseModel):
    audio: str
    initial_prompt: str | None = None
    model: str | None = None


class TranscribeResponse(BaseModel):
    text: str


class EnhanceRequest(BaseModel):
    segment_id: str
    audio_ref: str
    variant: str = Field(default="p4", pattern="^(baseline|p1|p2|p3|p4)$")


class EnhanceResponse(BaseModel):
    segment_id: str
    baseline_transcript: str
    prompt_text: str | None
    enhanced_transcript: str
    accepted: bool
    fallback_reason: str | None


class ScoreRow(BaseModel):
    segment_id: str
    wer: float


class CompareRequest(BaseModel):
    baseline: list[ScoreRow]
    variant: list[ScoreRow]


class CompareResponse(BaseModel):
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
    table: str


def create_app(config: RunConfig) -> FastAPI:
    app = FastAPI(title="repass", version="0.1.0")
    lexicon = build_lexicon(config)
    backend = build_backend(config, lexicon)
    client = build_chat_client(config, lexicon)
    ctx = build_context(config, lexicon)

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "backend": config.backend.kind, "chat": config.chat.kind}

    @app.post("/normalize", response_model=NormalizeResponse)
    def normalize_text(request: NormalizeRequest) -> NormalizeResponse:
        result = normalize(request.text)
        return NormalizeResponse(words=list(result.words), joined=result.joined)

    @app.post("/wer", response_model=WerResponse)
    def wer_endpoint(request: WerRequest) -> WerResponse:
        try:
            record = wer(request.reference, request.hypothesis)
        except WerUndefinedError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return WerResponse(
            substitutions=record.substitutions,
            deletions=record.deletions,
            insertions=record.insertions,
            reference_length=record.reference_length,
            wer=record.wer,
        )

    @app.post("/match", response_model=MatchResponse)
    def match(request: MatchRequest) -> MatchResponse:
        choices = lexicon.name_displays() if request.pool == "names" else lexicon.jargon_displays()
        tau = request.tau if request.tau is not None else (
            ctx.tau_replace if request.pool == "names" else ctx.tau_jargon
        )
        try:
            result = best_match(request.query, choices, tau)
        except RepassError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return MatchResponse(
            query=result.query, canonical=result.canonical, score=result.score, accepted=result.accepted
        )

    @app.post("/prompt/build", response_model=PromptResponse)
    def prompt_build(request: PromptRequest) -> PromptResponse:
        if not request.topic.strip():
            raise HTTPException(status_code=422, detail="topic must be non-empty")
        prompt = build_prompt(
            request.topic,
            request.names,
            request.jargon,
            ctx.budget,
            lambda t, n, j: sentence_builder(client, t, n, j),
        )
        return PromptResponse(
            text=prompt.text,
            token_count=prompt.token_count,
            topic=prompt.topic,
            names=list(prompt.names),
            jargon=list(prompt.jargon),
        )

    @app.post("/asr/transcribe", response_model=TranscribeResponse)
    def asr_transcribe(request: TranscribeRequest) -> TranscribeResponse:
        try:
            text = backend.transcribe(request.audio, request.initial_prompt)
        except RepassError as exc:
            raise HTTPException(status_code=502, detail=str(exc)) from exc
        return TranscribeResponse(text=text)

    @app.post("/enhance", response_model=EnhanceResponse)
    def enhance(request: EnhanceRequest) -> EnhanceResponse:
        segment = Segment(segment_id=request.segment_id, audio_ref=request.audio_ref)
        try:
            result = run_segment(request.variant, backend, client, segment, ctx)
        except RepassError as exc:
            raise HTTPException(status_code=502, detail=str(exc)) from exc
        return EnhanceResponse(
            segment_id=result.segment_id,
            baseline_transcript=result.baseline_transcript,
            prompt_text=result.prompt_used.text if result.prompt_used else None,
            enhanced_transcript=result.enhanced_transcript,
            accepted=result.accepted,
            fallback_reason=result.fallback_reason,
        )

    @app.post("/compare", response_model=CompareResponse)
    def compare_endpoint(request: CompareRequest) -> CompareResponse:
        try:
            report = evaluation.compare(
                [(row.segment_id, row.wer) for row in request.baseline],
                [(row.segment_id, row.wer) for row in request.variant],
            )
        except RepassError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return CompareResponse(
            mean_baseline=report.mean_baseline,
            sd_baseline=report.sd_baseline,
            mean_variant=report.mean_variant,
            sd_variant=report.sd_variant,
            improved=report.improved,
            degraded=report.degraded,
            unchanged=report.unchanged,
            w_statistic=report.w_statistic,
            p_value=report.p_value,
            n_effective=report.n_effective,
            effect_size=report.effect_size,
            effect_size_defined=report.effect_size_defined,
            table=evaluation.render_report(report, "table"),
        )

    return app
