"""FastAPI wiring for the /embed and /health wire contract."""
from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .encoders import Encoder

# Hard cap per request; larger batches get a 413 so clients chunk instead.
MAX_BATCH = 256


def create_app(encoder: Encoder) -> FastAPI:
    """An ASGI app serving the given encoder, read-only after startup."""
    app = FastAPI(title="embedsvc", docs_url=None, redoc_url=None)

    @app.get("/health")
    def health():
        return {"status": "ok", "dim": encoder.dim, "model": encoder.model_id}

    @app.post("/embed")
    async def embed(request: Request):
        # validated by hand instead of a response model so malformed input
        # yields plain 400s and oversized batches a 413, per the contract
        try:
            body = await request.json()
        except Exception:
            return _bad_request("request body is not valid JSON")
        if not isinstance(body, dict) or "texts" not in body:
            return _bad_request('request body must be {"texts": [...]}')
        texts = body["texts"]
        if not isinstance(texts, list) or not all(isinstance(t, str) for t in texts):
            return _bad_request("texts must be a list of strings")
        if not texts:
            return _bad_request("texts must contain at least one entry")
        if len(texts) > MAX_BATCH:
            return JSONResponse(
                {"error": f"batch of {len(texts)} exceeds the {MAX_BATCH}-text limit"},
                status_code=413,
            )
        return {"dim": encoder.dim, "vectors": encoder.encode(texts)}

    return app


def _bad_request(message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=400)
