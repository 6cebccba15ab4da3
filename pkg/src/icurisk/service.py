"""HTTP facade over a read-only model registry.

Endpoints (all JSON, under /api/v1): schema discovery for form rendering,
prediction, force-plot explanation with model-specific extras, and batched
what-if evaluation. The registry is loaded once at startup and never mutated,
so request handling is lock-free.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .cohort import CATEGORICAL, POPULATION_STATS, FeatureSchema, default_schema
from .errors import ArtifactError
from .explain import explain_record
from .models import TrainedModel, load_model

MAX_WHATIF_PERTURBATIONS = 64
DEFAULT_THRESHOLD = 0.5


class ApiError(Exception):
    """Maps to the documented error body {error, field?, detail}."""

    def __init__(self, status: int, error: str, detail: str, field: str | None = None):
        super().__init__(detail)
        self.status = status
        self.error = error
        self.detail = detail
        self.field = field


@dataclass(frozen=True)
class RegistryEntry:
    tag: str
    model: TrainedModel
    trained_at: str


@dataclass(frozen=True)
class ModelRegistry:
    entries: dict[str, RegistryEntry]
    schema: FeatureSchema

    def get(self, tag: str) -> TrainedModel:
        entry = self.entries.get(tag)
        if entry is None:
            raise ApiError(404, "unknown_model",
                           f"no model {tag!r}; available: {sorted(self.entries)}")
        return entry.model


def load_registry(model_dir: str | Path, background_size: int = 100,
                  seed: int = 0) -> ModelRegistry:
    """Load every *.json model artifact in a directory; tags are file stems.

    All models must share one feature schema. Artifact background samples
    are subsampled to `background_size` rows.
    """
    model_dir = Path(model_dir)
    entries: dict[str, RegistryEntry] = {}
    schema: FeatureSchema | None = None
    rng = np.random.default_rng(seed)
    for path in sorted(model_dir.glob("*.json")):
        if path.name.endswith(".manifest.json"):
            continue
        model = load_model(path)
        if schema is None:
            schema = model.schema
        elif model.schema != schema:
            raise ArtifactError(f"{path}: schema differs from other registry models")
        if model.background is not None and model.background.shape[0] > background_size:
            idx = np.sort(rng.choice(model.background.shape[0], size=background_size,
                                     replace=False))
            model.background = model.background[idx]
        trained_at = datetime.fromtimestamp(path.stat().st_mtime,
                                            tz=timezone.utc).isoformat()
        entries[path.stem] = RegistryEntry(tag=path.stem, model=model,
                                           trained_at=trained_at)
    return ModelRegistry(entries=entries, schema=schema or default_schema())


# ---------------------------------------------------------------------------
# Request/response documents


class PredictRequest(BaseModel):
    model: str
    features: dict[str, float | str]


class PredictResponse(BaseModel):
    probability: float
    label: int
    threshold: float


class ExplainRequest(BaseModel):
    model: str
    features: dict[str, float | str]
    mode: str = "auto"
    n_permutations: int = Field(default=200, ge=1)
    seed: int = 0


class ArrowDoc(BaseModel):
    feature: str
    raw_value: float | str
    phi: float


class PathStepDoc(BaseModel):
    feature: str
    comparator: str
    threshold: float


class NeighborDoc(BaseModel):
    values: dict[str, float | str]
    label: int
    distance: float


class NeighborSetDoc(BaseModel):
    neighbors: list[NeighborDoc]
    k: int
    positive: int
    negative: int
    vote_summary: str


class ExplainResponse(BaseModel):
    base: float
    prediction: float
    arrows: list[ArrowDoc]
    mode: str
    tolerance: float
    decision_path: list[PathStepDoc] | None = None
    leaf_probability: float | None = None
    neighbors: NeighborSetDoc | None = None


class WhatIfRequest(BaseModel):
    model: str
    features: dict[str, float | str]
    perturbations: list[dict[str, float | str]] = Field(default_factory=list)
    explain: bool = False
    mode: str = "auto"
    n_permutations: int = Field(default=200, ge=1)
    seed: int = 0


class WhatIfResult(BaseModel):
    perturbation: dict[str, float | str]
    probability: float
    delta_vs_base: float
    explanation: ExplainResponse | None = None


class WhatIfResponse(BaseModel):
    base_probability: float
    results: list[WhatIfResult]


# ---------------------------------------------------------------------------
# Validation helpers


def _validate_features(schema: FeatureSchema, features: dict) -> dict:
    for name in features:
        if name not in schema:
            raise ApiError(422, "validation", f"unknown feature {name!r}", field=name)
    validated: dict = {}
    for spec in schema.features:
        if spec.name not in features:
            raise ApiError(422, "validation", f"missing required feature {spec.name!r}",
                           field=spec.name)
        value = features[spec.name]
        if spec.kind == CATEGORICAL:
            if value not in spec.categories:
                raise ApiError(422, "validation",
                               f"{spec.name!r} must be one of {list(spec.categories)}",
                               field=spec.name)
        else:
            if isinstance(value, str):
                raise ApiError(422, "validation", f"{spec.name!r} must be numeric",
                               field=spec.name)
            if not np.isfinite(float(value)):
                raise ApiError(422, "validation", f"{spec.name!r} must be finite",
                               field=spec.name)
            value = float(value)
        validated[spec.name] = value
    return validated


def _schema_document(schema: FeatureSchema) -> dict:
    descriptors = []
    for spec in schema.features:
        stats = POPULATION_STATS.get(spec.name)
        descriptors.append({
            "name": spec.name,
            "kind": spec.kind,
            "unit": spec.unit,
            "categories": list(spec.categories),
            "role": "input",
            "display": None if stats is None else {"mean": stats[0], "std": stats[1]},
        })
    descriptors.append({
        "name": schema.target,
        "kind": "binary",
        "unit": "",
        "categories": [],
        "role": "target",
        "display": None,
    })
    return {"features": descriptors, "target": schema.target}


def _explain_response(trained: TrainedModel, features: dict, mode: str,
                      n_permutations: int, seed: int) -> ExplainResponse:
    bundle = explain_record(trained, features, mode=mode,
                            n_permutations=n_permutations, seed=seed)
    force = bundle.force
    doc = ExplainResponse(
        base=force.base,
        prediction=force.prediction,
        arrows=[ArrowDoc(feature=a.feature, raw_value=a.raw_value, phi=a.phi)
                for a in force.arrows],
        mode=force.mode,
        tolerance=force.tolerance,
    )
    if bundle.decision_path is not None:
        doc.decision_path = [PathStepDoc(feature=s.feature, comparator=s.comparator,
                                         threshold=s.threshold)
                             for s in bundle.decision_path.steps]
        doc.leaf_probability = bundle.decision_path.leaf_probability
    if bundle.neighbors is not None:
        doc.neighbors = NeighborSetDoc(
            neighbors=[NeighborDoc(values=n.values, label=n.label, distance=n.distance)
                       for n in bundle.neighbors.neighbors],
            k=bundle.neighbors.k,
            positive=bundle.neighbors.positive,
            negative=bundle.neighbors.negative,
            vote_summary=bundle.neighbors.vote_summary,
        )
    return doc


# ---------------------------------------------------------------------------
# Application


def create_app(registry: ModelRegistry, allow_origin: str | None = None,
               ui_dir: str | Path | None = None,
               threshold: float = DEFAULT_THRESHOLD) -> FastAPI:
    app = FastAPI(title="icurisk", version="0.1.0")

    if allow_origin:
        app.add_middleware(CORSMiddleware, allow_origins=[allow_origin],
                           allow_methods=["*"], allow_headers=["*"])

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError):
        body = {"error": exc.error, "detail": exc.detail}
        if exc.field is not None:
            body["field"] = exc.field
        return JSONResponse(status_code=exc.status, content=body)

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        field = ".".join(str(p) for p in first.get("loc", ())[1:]) or None
        body = {"error": "validation", "detail": first.get("msg", "invalid request")}
        if field:
            body["field"] = field
        return JSONResponse(status_code=422, content=body)

    @app.get("/api/v1/schema")
    def handle_schema():
        return _schema_document(registry.schema)

    @app.get("/api/v1/models")
    def handle_models():
        return {"models": [
            {"tag": e.tag, "family": e.model.family, "trained_at": e.trained_at,
             "metrics": e.model.metrics}
            for e in registry.entries.values()
        ]}

    @app.post("/api/v1/predict", response_model=PredictResponse)
    def handle_predict(request: PredictRequest):
        model = registry.get(request.model)
        features = _validate_features(model.schema, request.features)
        probability = model.predict_proba(features)
        return PredictResponse(probability=probability,
                               label=int(probability >= threshold),
                               threshold=threshold)

    @app.post("/api/v1/explain", response_model=ExplainResponse)
    def handle_explain(request: ExplainRequest):
        model = registry.get(request.model)
        features = _validate_features(model.schema, request.features)
        if request.mode not in ("auto", "exact", "sampled", "tree"):
            raise ApiError(422, "validation",
                           "mode must be auto, exact, sampled, or tree",
                           field="mode")
        return _explain_response(model, features, request.mode,
                                 request.n_permutations, request.seed)

    @app.post("/api/v1/whatif", response_model=WhatIfResponse)
    def handle_whatif(request: WhatIfRequest):
        model = registry.get(request.model)
        if len(request.perturbations) > MAX_WHATIF_PERTURBATIONS:
            raise ApiError(413, "too_many_perturbations",
                           f"at most {MAX_WHATIF_PERTURBATIONS} perturbations "
                           f"per request, got {len(request.perturbations)}")
        base_features = _validate_features(model.schema, request.features)
        base_probability = model.predict_proba(base_features)
        results = []
        for perturbation in request.perturbations:
            for name in perturbation:
                if name not in model.schema:
                    raise ApiError(422, "validation",
                                   f"perturbation targets unknown feature {name!r}",
                                   field=name)
            perturbed = dict(base_features)
            perturbed.update(perturbation)
            perturbed = _validate_features(model.schema, perturbed)
            probability = model.predict_proba(perturbed)
            explanation = None
            if request.explain:
                explanation = _explain_response(model, perturbed, request.mode,
                                                request.n_permutations, request.seed)
            results.append(WhatIfResult(perturbation=perturbation,
                                        probability=probability,
                                        delta_vs_base=probability - base_probability,
                                        explanation=explanation))
        return WhatIfResponse(base_probability=base_probability, results=results)

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
