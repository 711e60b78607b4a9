"""HTTP service: POST /generate and GET /health per the pipeline wire
protocol, plus POST /finetune as the augmented-dataset intake.

Single model instance; generation requests are serialized behind a lock and
the declared in-flight limit is 1. Malformed requests get 400, requests
before a model is loaded get 503.
"""
from __future__ import annotations

import hashlib
import threading
from pathlib import Path
from typing import Literal

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict, Field

from .decoding import beam_search, nucleus_sample
from .model import SidecarConfig, TinySeq2Seq, load_checkpoint
from .vocab import CharVocab


class ServiceState:
    def __init__(self, config: SidecarConfig | None = None):
        self.config = config or SidecarConfig()
        self.model: TinySeq2Seq | None = None
        self.vocab: CharVocab | None = None
        self.model_id: str = "unloaded"
        self.lock = threading.Lock()

    def load(self, checkpoint_path: str) -> None:
        model, vocab, config, model_id = load_checkpoint(checkpoint_path)
        config.checkpoint = checkpoint_path
        self.model = model
        self.vocab = vocab
        self.config = config
        self.model_id = model_id


class StrategyBody(BaseModel):
    model_config = ConfigDict(extra="forbid")
    kind: Literal["beam", "sample"]
    beam_width: int | None = Field(default=None, ge=1)
    temperature: float | None = Field(default=None, gt=0.0)
    top_p: float | None = Field(default=None, gt=0.0, le=1.0)


class GenerateBody(BaseModel):
    model_config = ConfigDict(extra="forbid")
    input: str
    num_candidates: int = Field(ge=1)
    max_new_tokens: int = Field(ge=1)
    strategy: StrategyBody
    seed: int | None = None


class FinetuneBody(BaseModel):
    model_config = ConfigDict(extra="ignore")
    dataset_path: str
    record_count: int = Field(ge=1)


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="titlegen-sidecar")

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": "malformed request", "detail": exc.errors()})

    @app.get("/health")
    def health():
        if state.model is None:
            return JSONResponse(status_code=503, content={"status": "loading"})
        return {"status": "ok", "model_id": state.model_id, "in_flight_limit": 1}

    @app.post("/generate")
    def generate(body: GenerateBody):
        if state.model is None or state.vocab is None:
            return JSONResponse(status_code=503, content={"error": "model not loaded"})
        config = state.config
        src_ids = state.vocab.encode(body.input, max_len=config.max_input_length) or [0]
        max_new = min(body.max_new_tokens, config.max_target_length)
        with state.lock:
            if body.strategy.kind == "beam":
                candidates = beam_search(
                    state.model,
                    state.vocab,
                    src_ids,
                    n=body.num_candidates,
                    beam_width=body.strategy.beam_width or config.beam_width,
                    max_new_tokens=max_new,
                )
            else:
                candidates = nucleus_sample(
                    state.model,
                    state.vocab,
                    src_ids,
                    n=body.num_candidates,
                    temperature=body.strategy.temperature or config.temperature,
                    top_p=body.strategy.top_p or config.top_p,
                    max_new_tokens=max_new,
                    seed=body.seed if body.seed is not None else config.default_seed,
                )
        candidates = [c if c else "untitled" for c in candidates]
        return {"candidates": candidates, "model_id": state.model_id}

    @app.post("/finetune")
    def finetune_intake(body: FinetuneBody):
        path = Path(body.dataset_path)
        if not path.exists():
            return JSONResponse(status_code=400, content={"error": f"dataset not found: {body.dataset_path}"})
        with open(path, "r", encoding="utf-8") as handle:
            count = sum(1 for line in handle if line.strip())
        if count != body.record_count:
            return JSONResponse(
                status_code=400,
                content={"error": f"record_count mismatch: announced {body.record_count}, file has {count}"},
            )
        token = hashlib.sha256(f"{path.resolve()}|{count}".encode("utf-8")).hexdigest()[:12]
        return {"ack": f"ft-{token}", "received_records": count}

    return app
