"""HTTP API for the interactive client.

Stateless JSON endpoints over the shared pipeline: capability metadata,
ordering computation (cached, idempotent), pixel-matrix slices with their
color scales, the std-dev brush series, and headless PPM rendering.
Binary float payloads travel base64-encoded with declared dtype.
"""

from __future__ import annotations

import base64

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from . import attribution, hclust, metrics, pipeline
from .vizdata import GROUP_ORDER, PixelMatrixSlice, render_image

DEFAULT_WINDOW = 100


class OrderingRequest(BaseModel):
    dataset: str
    stage: str
    base: str
    distance: str
    linkage: str
    method: str | None = None


def _encode_array(arr: np.ndarray) -> dict:
    raw = np.ascontiguousarray(arr, dtype="<f4")
    return {
        "dtype": "float32",
        "endianness": "little",
        "shape": list(raw.shape),
        "data": base64.b64encode(raw.tobytes()).decode("ascii"),
    }


def slice_document(slc: PixelMatrixSlice) -> dict:
    return {
        "offset": slc.offset,
        "count": slc.count,
        "group_order": list(GROUP_ORDER),
        "sample_indices": slc.sample_indices,
        "labels": slc.labels,
        "groups": {name: _encode_array(slc.groups[name]) for name in GROUP_ORDER},
        "scales": {name: slc.scales[name].to_doc() for name in GROUP_ORDER},
        "ordering_source": slc.ordering_source,
    }


def create_app(ws: pipeline.Workspace, cors_origins: list[str] | None = None) -> FastAPI:
    app = FastAPI(title="davots", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=cors_origins if cors_origins is not None else ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.workspace = ws

    def get_dataset(dataset_id: str):
        try:
            return ws.dataset(dataset_id)
        except pipeline.PipelineError:
            raise HTTPException(status_code=404, detail=f"unknown dataset {dataset_id!r}")

    def get_ordering(ordering_id: str) -> pipeline.OrderingResult:
        ordering = pipeline.load_ordering(ws, ordering_id)
        if ordering is None:
            raise HTTPException(status_code=404, detail=f"unknown ordering {ordering_id!r}")
        return ordering

    @app.get("/api/meta")
    def meta():
        datasets = {}
        for dataset_id in ws.list_datasets():
            ds = ws.dataset(dataset_id)
            datasets[dataset_id] = {
                "stages": sorted(ds.stages),
                "series_length": ds.series_length,
                "class_count": ds.class_count,
                "sample_counts": {s: len(ds.stages[s]) for s in ds.stages},
                "has_model": ws.default_weights_path(dataset_id).exists(),
            }
        return {
            "datasets": datasets,
            "attribution_methods": list(attribution.METHODS),
            "distance_kinds": list(metrics.DISTANCE_KINDS),
            "linkages": list(hclust.LINKAGES),
            "cluster_bases": list(pipeline.CLUSTER_BASES),
            "defaults": {"window": DEFAULT_WINDOW},
        }

    @app.post("/api/orderings")
    def orderings(req: OrderingRequest):
        ds = get_dataset(req.dataset)
        if req.stage not in ds.stages:
            raise HTTPException(status_code=404, detail=f"unknown stage {req.stage!r}")
        model = None
        if req.base != "raw":
            try:
                model = ws.model(req.dataset)
            except pipeline.PipelineError as exc:
                raise HTTPException(status_code=400, detail=str(exc))
        try:
            result = pipeline.compute_ordering(
                ws,
                ds,
                stage=req.stage,
                base=req.base,
                distance=req.distance,
                linkage=req.linkage,
                method=req.method,
                model=model,
            )
        except pipeline.PipelineError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except Exception as exc:  # compute failure
            raise HTTPException(status_code=500, detail=f"ordering computation failed: {exc}")
        return {
            "ordering_id": result.ordering_id,
            "permutation": result.permutation,
            "score": result.score,
        }

    def checked_range(ordering: pipeline.OrderingResult, offset: int, count: int):
        total = len(ordering.permutation)
        if offset < 0 or count < 1:
            raise HTTPException(status_code=400, detail="offset must be >= 0 and count >= 1")
        if offset + count > total:
            raise HTTPException(
                status_code=416,
                detail=f"rows [{offset}, {offset + count}) beyond sample count {total}",
            )

    def build_slice(ordering_id: str, offset: int, count: int, attribution_method: str | None):
        ordering = get_ordering(ordering_id)
        checked_range(ordering, offset, count)
        if attribution_method is not None and attribution_method not in attribution.METHODS:
            raise HTTPException(
                status_code=400, detail=f"unknown attribution method {attribution_method!r}"
            )
        try:
            return pipeline.build_slice(
                ws, ordering, offset, count, attribution_method=attribution_method
            )
        except pipeline.PipelineError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.get("/api/slice")
    def slice_endpoint(
        ordering_id: str, offset: int = 0, count: int = DEFAULT_WINDOW, attribution: str | None = None
    ):
        return slice_document(build_slice(ordering_id, offset, count, attribution))

    @app.get("/api/stddev")
    def stddev(ordering_id: str, base: str, method: str | None = None):
        ordering = get_ordering(ordering_id)
        try:
            values = pipeline.stddev_for_base(ws, ordering, base, method=method)
        except pipeline.PipelineError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {
            "base": base,
            "values": [float(v) for v in values],
            "permutation": ordering.permutation,
        }

    @app.get("/api/render")
    def render(
        ordering_id: str,
        offset: int = 0,
        count: int = DEFAULT_WINDOW,
        attribution: str | None = None,
        cell_w: int = 1,
        cell_h: int = 1,
    ):
        slc = build_slice(ordering_id, offset, count, attribution)
        try:
            ppm = render_image(slc, cell=(cell_w, cell_h))
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return Response(content=ppm, media_type="image/x-portable-pixmap")

    return app
