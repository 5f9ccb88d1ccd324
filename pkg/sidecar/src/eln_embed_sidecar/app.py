"""HTTP service implementing the /embed wire protocol.

Request bodies are validated by hand rather than through response models so
that every failure, including malformed JSON, comes back as a non-200 with
the protocol's ``{"error": <message>}`` shape.
"""

from __future__ import annotations

import json
import threading

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from eln_embed_sidecar.model import HashModel

_LEVELS = ("sentence", "token")


def _bad_request(message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=400)


def _parse_request(body: bytes) -> tuple[str, list[str]] | JSONResponse:
    try:
        payload = json.loads(body)
    except (UnicodeDecodeError, json.JSONDecodeError):
        return _bad_request("request body is not valid JSON")
    if not isinstance(payload, dict):
        return _bad_request("request body must be a JSON object")
    level = payload.get("level")
    if level not in _LEVELS:
        return _bad_request(f"level must be one of {list(_LEVELS)}, got {level!r}")
    texts = payload.get("texts")
    if not isinstance(texts, list):
        return _bad_request("texts must be a list of strings")
    for i, text in enumerate(texts):
        if not isinstance(text, str):
            return _bad_request(f"texts[{i}] is not a string")
    return level, texts


def create_app(model: HashModel, batch_size: int = 32) -> FastAPI:
    """Build the service around a loaded model.

    Inference runs under a lock: the protocol demands determinism, not
    throughput, and a single in-process model has no safe parallel path.
    """
    app = FastAPI(title="eln-embed-sidecar", docs_url=None, redoc_url=None)
    lock = threading.Lock()
    app.state.model = model

    @app.get("/health")
    def health() -> dict:
        return {"dim": model.dim, "model": model.model_id}

    @app.post("/embed")
    async def embed(request: Request) -> JSONResponse:
        parsed = _parse_request(await request.body())
        if isinstance(parsed, JSONResponse):
            return parsed
        level, texts = parsed
        with lock:
            if level == "sentence":
                vectors: list[list[float]] = []
                for start in range(0, len(texts), batch_size):
                    block = model.embed_sentences(texts[start : start + batch_size])
                    vectors.extend(row.tolist() for row in block)
                return JSONResponse({"dim": model.dim, "vectors": vectors})
            sequences = []
            token_lists = []
            for text in texts:
                tokens, block = model.embed_tokens(text)
                token_lists.append(tokens)
                sequences.append([row.tolist() for row in block])
            return JSONResponse(
                {"dim": model.dim, "sequences": sequences, "tokens": token_lists}
            )

    return app
