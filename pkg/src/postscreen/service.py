"""FastAPI service wrapping the library.

Run with ``postscreen serve`` or ``uvicorn postscreen.service:app``.
Train/evaluate/ablate endpoints operate on server-side paths named in
the posted config; /predict accepts inline posts for interactive
moderation clients.
"""

from __future__ import annotations

import logging

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import __version__, schemas
from .bundle import load_bundle
from .corpus import FINE_CLASSES, LabeledPost
from .errors import PostscreenError
from .preprocess import TextCleaner
from . import runs

log = logging.getLogger(__name__)


def create_app() -> FastAPI:
    app = FastAPI(title="postscreen", version=__version__)

    @app.exception_handler(PostscreenError)
    async def postscreen_error_handler(_request: Request, exc: PostscreenError):
        return JSONResponse(
            status_code=exc.http_status,
            content={"detail": {"kind": exc.kind, "message": str(exc)}},
        )

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/preprocess", response_model=schemas.PreprocessTextsResponse)
    def preprocess_texts(request: schemas.PreprocessTextsRequest):
        cleaner = TextCleaner(request.language)
        docs = []
        for text in request.texts:
            doc = cleaner.clean(text)
            counts = doc.pre_strip
            docs.append(
                schemas.CleanedDoc(
                    tokens=list(doc.tokens),
                    mentions=counts.mentions,
                    urls=counts.urls,
                    hashtags=counts.hashtags,
                    emojis=counts.emojis,
                )
            )
        return schemas.PreprocessTextsResponse(docs=docs)

    @app.post("/preprocess/file", response_model=schemas.PreprocessFileResponse)
    def preprocess_file(request: schemas.PreprocessFileRequest):
        result = runs.run_preprocess(
            request.config,
            split=request.split,
            input_path=request.input_path,
            output_name=request.output_name,
        )
        return schemas.PreprocessFileResponse(**result.summary())

    @app.post("/train", response_model=schemas.TrainResponse)
    def train(request: schemas.TrainRequest):
        result = runs.run_train(request.config)
        return schemas.TrainResponse(**result.summary())

    @app.post("/evaluate", response_model=schemas.EvaluateResponse)
    def evaluate(request: schemas.EvaluateRequest):
        result = runs.run_evaluate(
            request.config, request.model_path, request.split, request.force
        )
        return schemas.EvaluateResponse(**result.summary())

    @app.post("/predict", response_model=schemas.PredictInlineResponse)
    def predict_inline(request: schemas.PredictInlineRequest):
        models = load_bundle(request.model_path, force=request.force)
        out = []
        for item in request.posts:
            post = LabeledPost(
                id=item.id, text=item.text, coarse=models.negative_label, split="test"
            )
            pred = models.predict_post(post)
            fine_scores = {}
            if models.fine is not None:
                fine_scores = {
                    cls: pred.scores[f"fine:{cls}"] for cls in FINE_CLASSES
                }
            out.append(
                schemas.PredictionRow(
                    id=item.id,
                    coarse=pred.coarse,
                    fine=sorted(pred.fine),
                    score=pred.scores[models.positive_label],
                    fine_scores=fine_scores,
                )
            )
        return schemas.PredictInlineResponse(predictions=out)

    @app.post("/predict/file", response_model=schemas.PredictFileResponse)
    def predict_file(request: schemas.PredictFileRequest):
        result = runs.run_predict(
            request.config,
            request.model_path,
            request.input_path,
            request.output_name,
            request.force,
        )
        return schemas.PredictFileResponse(**result.summary())

    @app.post("/ablate", response_model=schemas.AblateResponse)
    def ablate(request: schemas.AblateRequest):
        result = runs.run_ablate(request.config)
        return schemas.AblateResponse(**result.summary())

    @app.post("/ensemble", response_model=schemas.EnsembleResponse)
    def ensemble(request: schemas.EnsembleRequest):
        result = runs.run_ensemble(request.config, request.force)
        return schemas.EnsembleResponse(**result.summary())

    @app.post("/audit", response_model=schemas.AuditResponse)
    def audit(request: schemas.AuditRequest):
        result = runs.run_audit(
            request.config, request.model_paths, request.split, request.force
        )
        return schemas.AuditResponse(**result.summary())

    return app


app = create_app()
