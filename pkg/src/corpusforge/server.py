"""FastAPI service implementing the backend wire protocol.

Serves POST /translate, /score, and /generate over JSON, so the pipeline's
HTTP clients have a real endpoint to talk to. The default app is backed by
the deterministic mock backends, which makes it a self-contained offline
stand-in for the translation, QE, and generation services.
"""

from __future__ import annotations

from typing import Mapping

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .backends import (
    BackendError,
    GenerationParams,
    Generator,
    HashGenerator,
    HashScorer,
    QeScorer,
    StampTranslator,
    SystemId,
    Translator,
)
from .manifest import LanguageTag

DEFAULT_SYSTEMS = ("nllb-3b", "tower-mistral-7b", "tower-13b", "eurollm-9b")


class TranslateRequest(BaseModel):
    system: str | None = None
    source_text: str = Field(min_length=1)
    source_lang: LanguageTag
    target_lang: LanguageTag


class TranslateResponse(BaseModel):
    output: str


class ScoreRequest(BaseModel):
    source_text: str = Field(min_length=1)
    hypothesis: str = Field(min_length=1)
    source_lang: LanguageTag
    target_lang: LanguageTag


class ScoreResponse(BaseModel):
    score: float = Field(ge=0.0, le=1.0)


class GenerateRequest(BaseModel):
    prompt: str = Field(min_length=1)
    max_new_tokens: int = Field(default=256, ge=1)
    temperature: float = Field(default=0.0, ge=0.0)
    seed: int | None = None


class GenerateResponse(BaseModel):
    output: str


def create_app(
    translators: Mapping[SystemId, Translator],
    scorer: QeScorer,
    generator: Generator,
) -> FastAPI:
    app = FastAPI(title="corpusforge backends", version="0.1.0")

    @app.post("/translate", response_model=TranslateResponse)
    def translate(req: TranslateRequest) -> TranslateResponse:
        if req.source_lang is req.target_lang:
            raise HTTPException(400, "source_lang and target_lang must differ")
        system = req.system or next(iter(translators))
        translator = translators.get(system)
        if translator is None:
            raise HTTPException(404, f"unknown system {system!r}")
        try:
            output = translator.translate(req.source_text, req.source_lang, req.target_lang)
        except BackendError as exc:
            raise HTTPException(502, str(exc)) from exc
        return TranslateResponse(output=output)

    @app.post("/score", response_model=ScoreResponse)
    def score(req: ScoreRequest) -> ScoreResponse:
        value = scorer.score(
            req.source_text, req.hypothesis, req.source_lang, req.target_lang
        )
        return ScoreResponse(score=value)

    @app.post("/generate", response_model=GenerateResponse)
    def generate(req: GenerateRequest) -> GenerateResponse:
        params = GenerationParams(
            max_new_tokens=req.max_new_tokens,
            temperature=req.temperature,
            seed=req.seed,
        )
        try:
            output = generator.generate(req.prompt, params)
        except BackendError as exc:
            raise HTTPException(502, str(exc)) from exc
        return GenerateResponse(output=output)

    return app


def create_mock_app(seed: int = 0, systems: tuple[str, ...] = DEFAULT_SYSTEMS) -> FastAPI:
    """App wired to the deterministic mocks; useful for offline runs and tests."""
    translators = {name: StampTranslator(name) for name in systems}
    return create_app(translators, HashScorer(seed), HashGenerator(seed))
