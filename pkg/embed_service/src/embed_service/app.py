"""The sidecar application.

Wire protocol: ``POST /embed`` with ``{"texts": ["...", ...]}`` returns
``{"model": str, "dim": int, "vectors": [[float, ...], ...]}``, vectors
L2-normalized server-side and order-preserving; malformed input gets
HTTP 400 with ``{"error": "..."}``. ``GET /health`` answers 503 until
the model finishes loading (which happens on a background thread), then
200 with the model id.
"""

from __future__ import annotations

import threading
from contextlib import asynccontextmanager
from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .encoder import DEFAULT_MODEL_ID, Encoder, LoaderFn, load_sentence_transformer


@dataclass
class ServiceConfig:
    model_id: str = DEFAULT_MODEL_ID
    host: str = "127.0.0.1"
    port: int = 8901
    max_batch: int = 256

    def __post_init__(self) -> None:
        if self.max_batch < 1:
            raise ValueError(f"max_batch must be >= 1, got {self.max_batch}")


class _State:
    def __init__(self) -> None:
        self.encoder: Encoder | None = None
        self.error: str | None = None
        self.lock = threading.Lock()


def create_app(config: ServiceConfig | None = None, loader: LoaderFn | None = None) -> FastAPI:
    config = config or ServiceConfig()
    loader = loader or load_sentence_transformer
    state = _State()

    def load_model() -> None:
        try:
            encoder = loader(config.model_id)
        except Exception as exc:  # surface load failures through /health and /embed
            state.error = f"model load failed: {exc}"
            return
        state.encoder = encoder

    @asynccontextmanager
    async def lifespan(_: FastAPI):
        threading.Thread(target=load_model, daemon=True).start()
        yield

    app = FastAPI(title="embed-service", lifespan=lifespan)

    @app.get("/health")
    def health() -> JSONResponse:
        if state.encoder is not None:
            return JSONResponse({"status": "ok", "model": state.encoder.model_id})
        if state.error is not None:
            return JSONResponse({"status": "error", "error": state.error}, status_code=503)
        return JSONResponse({"status": "loading"}, status_code=503)

    @app.post("/embed")
    async def embed(request: Request) -> JSONResponse:
        try:
            body = await request.json()
        except Exception:
            return JSONResponse({"error": "request body is not valid JSON"}, status_code=400)
        if not isinstance(body, dict) or "texts" not in body:
            return JSONResponse({"error": "missing required field 'texts'"}, status_code=400)
        texts = body["texts"]
        if not isinstance(texts, list) or not all(isinstance(t, str) for t in texts):
            return JSONResponse({"error": "'texts' must be a list of strings"}, status_code=400)
        if state.error is not None:
            return JSONResponse({"error": state.error}, status_code=500)
        if state.encoder is None:
            return JSONResponse({"error": "model is still loading"}, status_code=503)
        encoder = state.encoder
        if not texts:
            return JSONResponse({"model": encoder.model_id, "dim": encoder.dim, "vectors": []})
        chunks = []
        with state.lock:  # the model need not be reentrant; serialize calls
            for offset in range(0, len(texts), config.max_batch):
                chunks.append(
                    np.asarray(encoder.encode(texts[offset : offset + config.max_batch]),
                               dtype=np.float64)
                )
        matrix = np.vstack(chunks)
        norms = np.linalg.norm(matrix, axis=1)
        if np.any(norms == 0.0):
            return JSONResponse({"error": "encoder produced a zero vector"}, status_code=500)
        matrix = matrix / norms[:, None]
        return JSONResponse(
            {"model": encoder.model_id, "dim": encoder.dim, "vectors": matrix.tolist()}
        )

    return app
