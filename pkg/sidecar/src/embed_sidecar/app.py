"""FastAPI app exposing the embed-provider protocol.

    POST /embed   {"content_b64": str, "text_hint": str|null, "dim": int}
                  -> 200 {"vector": [f, ...], "model": str}
                  -> 400 content not decodable (bad base64 or not an image)
                  -> 422 dim does not match the loaded model
                  -> 503 model not loaded yet
    GET  /health  -> 200 {"model": str, "dim": int, "ready": true}
                  -> 503 before the model finishes loading

When a text hint is present the image and text embeddings are fused as
the renormalized mean of the two unit vectors, and the fusion rule is
recorded in the response model string.
"""

from __future__ import annotations

import base64
import binascii
import io
from contextlib import asynccontextmanager

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from PIL import Image, UnidentifiedImageError
from pydantic import BaseModel

from .encoders import Encoder, fuse_unit_mean


class EmbedRequest(BaseModel):
    content_b64: str
    text_hint: str | None = None
    dim: int


def create_app(encoder_factory) -> FastAPI:
    """Build the service; the encoder loads once at startup."""

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        app.state.encoder = encoder_factory()
        yield

    app = FastAPI(title="embed-sidecar", lifespan=lifespan)
    app.state.encoder = None

    def _encoder() -> Encoder:
        encoder = getattr(app.state, "encoder", None)
        if encoder is None:
            raise HTTPException(status_code=503, detail="model not loaded")
        return encoder

    @app.get("/health")
    def health():
        encoder = getattr(app.state, "encoder", None)
        if encoder is None:
            return JSONResponse(status_code=503, content={"ready": False})
        return {"model": encoder.name, "dim": encoder.dim, "ready": True}

    @app.post("/embed")
    def embed(request: EmbedRequest):
        encoder = _encoder()
        if request.dim != encoder.dim:
            raise HTTPException(
                status_code=422,
                detail=f"model produces dim {encoder.dim}, request asked for {request.dim}",
            )
        try:
            raw = base64.b64decode(request.content_b64, validate=True)
        except (binascii.Error, ValueError):
            raise HTTPException(status_code=400, detail="content_b64 is not valid base64") from None
        try:
            with Image.open(io.BytesIO(raw)) as image:
                image.load()
                vector = encoder.embed_image(image)
        except (UnidentifiedImageError, OSError):
            raise HTTPException(status_code=400, detail="content is not a decodable image") from None

        model = encoder.name
        if request.text_hint is not None:
            vector = fuse_unit_mean(vector, encoder.embed_text(request.text_hint))
            model = f"{model}+fusion=unit-mean"
        return {"vector": [float(x) for x in vector], "model": model}

    return app
