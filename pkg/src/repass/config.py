"""Run configuration: YAML file with ${ENV_VAR} interpolation for secrets.

Relative paths resolve against the config file's directory. Exactly one
backend and one chat client are configured; referenced files must exist at
validation time. API keys are named by environment variable, never stored.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .agents import ChatClient, HeuristicChatClient, HttpChatClient, ScriptedChatClient
from .asr import AsrBackend, CorruptionModel, HttpAsrBackend, MockAsrBackend
from .errors import ConfigError
from .lexicon import Lexicon
from .pipeline import EnhanceContext
from .promptbuild import SubwordTokenizer, TokenBudget

_ENV_RE = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}")


@dataclass(frozen=True)
class BackendSpec:
    kind: str  # "mock" | "http"
    endpoint: str | None = None
    model: str | None = None
    corruption: CorruptionModel = field(default_factory=CorruptionModel)


@dataclass(frozen=True)
class ChatSpec:
    kind: str  # "heuristic" | "scripted" | "http"
    endpoint: str | None = None
    model: str | None = None
    api_key_env: str = "CHAT_API_KEY"
    fixture: str | None = None
    timeout: float = 30.0


@dataclass(frozen=True)
class Thresholds:
    tau_match: float = 0.75
    tau_replace: float = 0.85
    tau_jargon: float = 0.90
    salience_critical: float = 3.84
    out_of_domain_min: float = 0.60


@dataclass(frozen=True)
class RunConfig:
    roster_path: str
    glossary_path: str
    domain_label: str
    fallback_topic: str
    backend: BackendSpec
    chat: ChatSpec
    thresholds: Thresholds = field(default_factory=Thresholds)
    target_tokens: int = 20
    tokenizer_merges: str | None = None
    workers: int = 1
    seed: int = 1234
    out_dir: str = "runs"


def _interpolate(value):
    if isinstance(value, str):
        def sub(match: re.Match) -> str:
            name = match.group(1)
            if name not in os.environ:
                raise ConfigError(f"config references undefined environment variable ${{{name}}}")
            return os.environ[name]

        return _ENV_RE.sub(sub, value)
    if isinstance(value, dict):
        return {k: _interpolate(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_interpolate(v) for v in value]
    return value


def _require_file(path: str, what: str) -> str:
    if not Path(path).is_file():
        raise ConfigError(f"{what} not found: {path}")
    return path


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    raw = _interpolate(raw)
    base = p.parent

    def resolve(value: str | None) -> str | None:
        if value is None:
            return None
        q = Path(value)
        return str(q if q.is_absolute() else base / q)

    try:
        lex = raw.get("lexicon", {})
        roster = _require_file(resolve(lex["roster"]), "roster file")
        glossary = _require_file(resolve(lex["glossary"]), "glossary file")

        backend_raw = raw.get("backend", {})
        kind = backend_raw.get("kind")
        if kind not in ("mock", "http"):
            raise ConfigError(f"backend.kind must be 'mock' or 'http', got {kind!r}")
        seed = int(raw.get("seed", 1234))
        corruption_raw = dict(backend_raw.get("corruption", {}))
        corruption_raw.setdefault("rng_seed", seed)
        try:
            corruption = CorruptionModel(**corruption_raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad corruption model: {exc}") from exc
        if kind == "http" and not backend_raw.get("endpoint"):
            raise ConfigError("backend.kind 'http' requires backend.endpoint")
        backend = BackendSpec(
            kind=kind,
            endpoint=backend_raw.get("endpoint"),
            model=backend_raw.get("model"),
            corruption=corruption,
        )

        chat_raw = raw.get("chat", {})
        chat_kind = chat_raw.get("kind")
        if chat_kind not in ("heuristic", "scripted", "http"):
            raise ConfigError(f"chat.kind must be 'heuristic', 'scripted', or 'http', got {chat_kind!r}")
        fixture = resolve(chat_raw.get("fixture"))
        if chat_kind == "scripted":
            if fixture is None:
                raise ConfigError("chat.kind 'scripted' requires chat.fixture")
            _require_file(fixture, "scripted chat fixture")
        if chat_kind == "http" and not (chat_raw.get("endpoint") and chat_raw.get("model")):
            raise ConfigError("chat.kind 'http' requires chat.endpoint and chat.model")
        chat = ChatSpec(
            kind=chat_kind,
            endpoint=chat_raw.get("endpoint"),
            model=chat_raw.get("model"),
            api_key_env=chat_raw.get("api_key_env", "CHAT_API_KEY"),
            fixture=fixture,
            timeout=float(chat_raw.get("timeout", 30.0)),
        )

        thresholds_raw = raw.get("thresholds", {})
        thresholds = Thresholds(
            tau_match=float(thresholds_raw.get("tau_match", 0.75)),
            tau_replace=float(thresholds_raw.get("tau_replace", 0.85)),
            tau_jargon=float(thresholds_raw.get("tau_jargon", 0.90)),
            salience_critical=float(thresholds_raw.get("salience_critical", 3.84)),
            out_of_domain_min=float(thresholds_raw.get("out_of_domain_min", 0.60)),
        )

        prompt_raw = raw.get("prompt", {})
        merges = resolve(prompt_raw.get("tokenizer_merges"))
        if merges is not None:
            _require_file(merges, "tokenizer merges file")

        domain_label = str(raw.get("domain_label", ""))
        return RunConfig(
            roster_path=roster,
            glossary_path=glossary,
            domain_label=domain_label,
            fallback_topic=str(raw.get("fallback_topic", domain_label)),
            backend=backend,
            chat=chat,
            thresholds=thresholds,
            target_tokens=int(prompt_raw.get("target_tokens", 20)),
            tokenizer_merges=merges,
            workers=int(raw.get("workers", 1)),
            seed=seed,
            out_dir=str(resolve(raw.get("out_dir", "runs"))),
        )
    except KeyError as exc:
        raise ConfigError(f"config is missing required key: {exc}") from exc


def build_lexicon(config: RunConfig) -> Lexicon:
    return Lexicon.from_files(config.roster_path, config.glossary_path, domain_label=config.domain_label)


def build_backend(config: RunConfig, lexicon: Lexicon) -> AsrBackend:
    if config.backend.kind == "mock":
        return MockAsrBackend(config.backend.corruption, lexicon)
    return HttpAsrBackend(config.backend.endpoint, model=config.backend.model)


def build_chat_client(config: RunConfig, lexicon: Lexicon) -> ChatClient:
    spec = config.chat
    if spec.kind == "heuristic":
        return HeuristicChatClient(lexicon, domain_label=config.domain_label, tau_detect=config.thresholds.tau_match)
    if spec.kind == "scripted":
        return ScriptedChatClient.from_file(spec.fixture)
    return HttpChatClient(
        endpoint=spec.endpoint,
        model=spec.model,
        api_key_env=spec.api_key_env,
        timeout=spec.timeout,
    )


def build_budget(config: RunConfig) -> TokenBudget:
    tokenizer = SubwordTokenizer.from_file(config.tokenizer_merges) if config.tokenizer_merges else None
    return TokenBudget(target_limit=config.target_tokens, tokenizer=tokenizer)


def build_context(config: RunConfig, lexicon: Lexicon) -> EnhanceContext:
    return EnhanceContext(
        lexicon=lexicon,
        budget=build_budget(config),
        domain_label=config.domain_label,
        fallback_topic=config.fallback_topic or config.domain_label,
        tau_match=config.thresholds.tau_match,
        tau_replace=config.thresholds.tau_replace,
        tau_jargon=config.thresholds.tau_jargon,
        out_of_domain_min=config.thresholds.out_of_domain_min,
    )
