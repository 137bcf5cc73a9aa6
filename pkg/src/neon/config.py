"""Pipeline configuration: one JSON file, one section per stage."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ConfigError


@dataclass
class ChunkingConfig:
    m: int = 5
    stride: int = 3


@dataclass
class DedupConfig:
    threshold: float = 0.8
    window_days: int | None = None


@dataclass
class ExtractionConfig:
    variant: str = "m2"
    k_batch: int = 4
    top_p: int = 20
    retries: int = 3
    parallelism: int = 1
    subjects: list[str] = field(default_factory=list)


@dataclass
class RetrievalConfig:
    strategy: str = "temporal"
    k: int | None = None  # None: 10 for interaction stores, 5 for chunk stores
    r: int = 3


@dataclass
class ProvidersConfig:
    llm_endpoint: str = ""
    llm_model: str = ""
    api_key_env: str = "NEON_LLM_API_KEY"
    temperature: float = 0.0
    max_tokens: int = 1024
    timeout: float = 60.0
    rate_limit: float | None = None
    cassette: str | None = None  # replay recorded responses instead of calling the endpoint
    record: str | None = None  # append live responses to this cassette
    embedder: str = "mock"  # "mock" or "http"
    embed_endpoint: str = ""
    embed_model: str = ""
    embed_dimension: int = 64
    mock: bool = False


@dataclass
class EvalConfig:
    mode: str = "zero"
    attribute: str = "all"
    examples_path: str | None = None
    clamp: bool = False
    parallelism: int = 1


@dataclass
class QueryLogConfig:
    window: int = 3
    min_users: int = 5


@dataclass
class PipelineConfig:
    chunking: ChunkingConfig = field(default_factory=ChunkingConfig)
    dedup: DedupConfig = field(default_factory=DedupConfig)
    extraction: ExtractionConfig = field(default_factory=ExtractionConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    providers: ProvidersConfig = field(default_factory=ProvidersConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    querylog: QueryLogConfig = field(default_factory=QueryLogConfig)

    def validate(self) -> "PipelineConfig":
        try:
            self._validate()
        except TypeError as exc:  # e.g. a string where an optional number belongs
            raise ConfigError(f"wrongly typed config value: {exc}") from exc
        return self

    def _validate(self) -> None:
        c = self
        _check(c.chunking.m >= 1, "chunking.m must be >= 1")
        _check(1 <= c.chunking.stride <= c.chunking.m, "chunking.stride must lie in [1, m]")
        _check(0.0 <= c.dedup.threshold <= 1.0, "dedup.threshold must lie in [0, 1]")
        _check(c.dedup.window_days is None or c.dedup.window_days >= 0, "dedup.window_days must be >= 0")
        _check(c.extraction.variant in ("m1", "m2"), "extraction.variant must be m1 or m2")
        _check(c.extraction.k_batch >= 1, "extraction.k_batch must be >= 1")
        _check(c.extraction.top_p >= 1, "extraction.top_p must be >= 1")
        _check(c.extraction.retries >= 1, "extraction.retries must be >= 1")
        _check(c.extraction.parallelism >= 1, "extraction.parallelism must be >= 1")
        _check(c.retrieval.strategy in ("temporal", "generic", "hybrid"), "retrieval.strategy is unknown")
        _check(c.retrieval.k is None or c.retrieval.k >= 1, "retrieval.k must be >= 1")
        _check(c.retrieval.r >= 0, "retrieval.r must be >= 0")
        _check(0.0 <= c.providers.temperature <= 2.0, "providers.temperature must lie in [0, 2]")
        _check(c.providers.max_tokens >= 1, "providers.max_tokens must be >= 1")
        _check(c.providers.embedder in ("mock", "http"), "providers.embedder must be mock or http")
        _check(c.providers.embed_dimension >= 1, "providers.embed_dimension must be >= 1")
        _check(c.eval.mode in ("zero", "few"), "eval.mode must be zero or few")
        _check(c.eval.parallelism >= 1, "eval.parallelism must be >= 1")
        _check(c.querylog.window >= 1, "querylog.window must be >= 1")
        _check(c.querylog.min_users >= 1, "querylog.min_users must be >= 1")

    def to_json(self) -> dict:
        return asdict(self)


def _check(ok: bool, message: str) -> None:
    if not ok:
        raise ConfigError(message)


def _section(cls, data, name: str):
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be an object")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in {name!r}: {', '.join(unknown)}")
    obj = cls()
    for key, value in data.items():
        default = getattr(obj, key)
        if isinstance(default, bool) and not isinstance(value, bool):
            raise ConfigError(f"{name}.{key} must be a boolean")
        if isinstance(default, (int, float)) and not isinstance(default, bool):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{name}.{key} must be a number")
            if isinstance(default, int) and not isinstance(value, int):
                raise ConfigError(f"{name}.{key} must be an integer")
        setattr(obj, key, value)
    return obj


def config_from_dict(data: dict) -> PipelineConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    cfg = PipelineConfig()
    known = {f.name: f for f in fields(PipelineConfig)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(unknown)}")
    for name, value in data.items():
        setattr(cfg, name, _section(type(getattr(cfg, name)), value, name))
    return cfg.validate()


def load_config(path: str | Path | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig().validate()
    try:
        data = json.loads(Path(path).read_text("utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from exc
    return config_from_dict(data)
