"""Run configuration: TOML file, overridden by environment variables,
overridden by CLI flags. See docs/config.md for the schema."""

from __future__ import annotations

import hashlib
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .backends import (
    Generator,
    RetryPolicy,
    HashGenerator,
    HashScorer,
    HttpGenerator,
    HttpQeScorer,
    HttpTranslator,
    QeScorer,
    StampTranslator,
    SystemId,
    Translator,
)
from .curriculum import DEFAULT_HINT_PROBABILITY, HintPolicy
from .geometry import SpeechGeometryConfig
from .pseudolabel import DEFAULT_ST_THRESHOLD
from .qa_synth import DEFAULT_QUESTION_THRESHOLD
from .server import DEFAULT_SYSTEMS

ENV_PREFIX = "CORPUSFORGE_BACKEND_"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class BackendEndpoint:
    url: str
    token: str | None = None


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    jobs: int = 1
    mode: str = "mock"  # "mock" or "http"
    registry: tuple[SystemId, ...] = DEFAULT_SYSTEMS
    st_threshold: float = DEFAULT_ST_THRESHOLD
    sqa_question_threshold: float = DEFAULT_QUESTION_THRESHOLD
    hint: HintPolicy = field(default_factory=HintPolicy)
    geometry: SpeechGeometryConfig = field(default_factory=SpeechGeometryConfig)
    endpoints: Mapping[str, BackendEndpoint] = field(default_factory=dict)
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    config_hash: str = "default"

    def __post_init__(self) -> None:
        if self.mode not in ("mock", "http"):
            raise ConfigError(f"backends.mode must be 'mock' or 'http', got {self.mode!r}")
        if not self.registry:
            raise ConfigError("backend registry must be non-empty")
        if len(set(self.registry)) != len(self.registry):
            raise ConfigError("backend registry names must be unique")
        for name, value in (
            ("thresholds.st", self.st_threshold),
            ("thresholds.sqa_question", self.sqa_question_threshold),
        ):
            if not (0.0 <= value <= 1.0):
                raise ConfigError(f"{name} must be in [0, 1], got {value}")


def _env_url(name: str) -> str | None:
    key = ENV_PREFIX + name.upper().replace("-", "_") + "_URL"
    return os.environ.get(key)


def load_config(path: str | Path | None = None, **overrides) -> RunConfig:
    """Load config with 12-factor layering: file < environment < overrides.

    Passing an override value of None leaves the lower layer in effect.
    """
    data: dict = {}
    config_hash = "default"
    if path is not None:
        raw = Path(path).read_bytes()
        config_hash = hashlib.sha256(raw).hexdigest()
        try:
            data = tomllib.loads(raw.decode("utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc

    backends = data.get("backends", {})
    thresholds = data.get("thresholds", {})
    hint_cfg = data.get("hint", {})
    geometry_cfg = data.get("geometry", {})

    seed = overrides.get("seed")
    if seed is None:
        seed = int(data.get("seed", 0))
    jobs = overrides.get("jobs")
    if jobs is None:
        jobs = int(data.get("jobs", 1))

    registry = tuple(backends.get("registry", DEFAULT_SYSTEMS))

    endpoints: dict[str, BackendEndpoint] = {}
    systems_cfg = backends.get("systems", {})
    for name in (*registry, "scorer", "generator"):
        section = systems_cfg.get(name) if name in registry else backends.get(name, {})
        section = section or {}
        url = _env_url(name) or section.get("url")
        if url:
            endpoints[name] = BackendEndpoint(url=url, token=section.get("token"))

    hint_prob = overrides.get("hint_probability")
    if hint_prob is None:
        hint_prob = float(hint_cfg.get("probability", DEFAULT_HINT_PROBABILITY))

    st_threshold = overrides.get("st_threshold")
    if st_threshold is None:
        st_threshold = float(thresholds.get("st", DEFAULT_ST_THRESHOLD))
    q_threshold = overrides.get("sqa_question_threshold")
    if q_threshold is None:
        q_threshold = float(thresholds.get("sqa_question", DEFAULT_QUESTION_THRESHOLD))

    try:
        geometry = SpeechGeometryConfig(**geometry_cfg)
    except TypeError as exc:
        raise ConfigError(f"invalid [geometry] key: {exc}") from exc

    try:
        hint = HintPolicy(probability=hint_prob, rng_seed=seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    retry = RetryPolicy(
        base_delay_s=float(backends.get("base_delay_s", 0.25)),
        factor=float(backends.get("backoff_factor", 2.0)),
        max_attempts=int(backends.get("max_attempts", 5)),
    )

    return RunConfig(
        seed=seed,
        jobs=jobs,
        mode=backends.get("mode", "mock"),
        retry=retry,
        registry=registry,
        st_threshold=st_threshold,
        sqa_question_threshold=q_threshold,
        hint=hint,
        geometry=geometry,
        endpoints=endpoints,
        config_hash=config_hash,
    )


def build_registry(config: RunConfig) -> dict[SystemId, Translator]:
    """Ordered translator registry per config mode."""
    if config.mode == "mock":
        return {name: StampTranslator(name) for name in config.registry}
    registry: dict[SystemId, Translator] = {}
    for name in config.registry:
        endpoint = config.endpoints.get(name)
        if endpoint is None:
            raise ConfigError(f"no URL configured for backend {name!r}")
        registry[name] = HttpTranslator(
            name, endpoint.url, token=endpoint.token, retry=config.retry
        )
    return registry


def build_scorer(config: RunConfig) -> QeScorer:
    if config.mode == "mock":
        return HashScorer(config.seed)
    endpoint = config.endpoints.get("scorer")
    if endpoint is None:
        raise ConfigError("no URL configured for the QE scorer")
    return HttpQeScorer(endpoint.url, token=endpoint.token, retry=config.retry)


def build_generator(config: RunConfig) -> Generator:
    if config.mode == "mock":
        return HashGenerator(config.seed)
    endpoint = config.endpoints.get("generator")
    if endpoint is None:
        raise ConfigError("no URL configured for the generator")
    return HttpGenerator(endpoint.url, token=endpoint.token, retry=config.retry)
