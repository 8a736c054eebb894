"""Shared orchestration for the CLI and the HTTP service.

A workspace owns the dataset registry, the artifact cache and trained
model weights; batch runs and interactive requests go through the same
compute-on-miss paths so cache keys agree everywhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import attribution as attr_mod
from . import hclust, metrics, vizdata
from .ingest import Dataset, export_stage_tsv, load_ucr, znormalize
from .model import ModelBundle, forward_batch, load_weights
from .store import ArtifactKey, ArtifactStore

CLUSTER_BASES = ("raw", "activations", "attributions")


class PipelineError(ValueError):
    pass


def pack_array(arr: np.ndarray) -> bytes:
    body = np.ascontiguousarray(arr, dtype="<f4").tobytes()
    head = json.dumps({"dtype": "<f4", "shape": list(arr.shape)}).encode()
    return len(head).to_bytes(4, "little") + head + body


def unpack_array(data: bytes) -> np.ndarray:
    hlen = int.from_bytes(data[:4], "little")
    head = json.loads(data[4 : 4 + hlen])
    arr = np.frombuffer(data[4 + hlen :], dtype=head["dtype"]).reshape(head["shape"])
    return arr.astype(np.float64)


class Workspace:
    """Dataset registry + artifact cache rooted at one directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.store = ArtifactStore(self.root / "cache")
        self.datasets_dir = self.root / "datasets"
        self.datasets_dir.mkdir(parents=True, exist_ok=True)
        self._datasets: dict[str, Dataset] = {}
        self._models: dict[str, ModelBundle] = {}
        self._forward_cache: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}

    # -- datasets ----------------------------------------------------------

    def ingest(self, path: str | Path, dataset_id: str) -> Dataset:
        ds = znormalize(load_ucr(path, dataset_id))
        ds.validate()
        target = self.datasets_dir / dataset_id
        target.mkdir(parents=True, exist_ok=True)
        for stage in ds.stages:
            export_stage_tsv(ds, stage, target / f"{dataset_id}_{stage.upper()}.tsv")
        meta = {
            "id": ds.id,
            "series_length": ds.series_length,
            "class_count": ds.class_count,
            "stages": sorted(ds.stages),
            "label_values": list(ds.label_values),
        }
        (target / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=1))
        self._datasets[dataset_id] = ds
        return ds

    def list_datasets(self) -> list[str]:
        return sorted(p.name for p in self.datasets_dir.iterdir() if (p / "meta.json").exists())

    def dataset(self, dataset_id: str) -> Dataset:
        if dataset_id not in self._datasets:
            target = self.datasets_dir / dataset_id
            if not (target / "meta.json").exists():
                raise PipelineError(f"unknown dataset {dataset_id!r}")
            ds = load_ucr(target, dataset_id)
            self._datasets[dataset_id] = ds
        return self._datasets[dataset_id]

    # -- models ------------------------------------------------------------

    def default_weights_path(self, dataset_id: str) -> Path:
        return self.datasets_dir / dataset_id / "model.weights"

    def model(self, dataset_id: str, weights_path: str | Path | None = None) -> ModelBundle:
        path = Path(weights_path) if weights_path else self.default_weights_path(dataset_id)
        key = str(path)
        if key not in self._models:
            if not path.exists():
                raise PipelineError(f"no model weights at {path}; run train first")
            self._models[key] = load_weights(path.read_bytes())
        return self._models[key]

    # -- derived data ------------------------------------------------------

    def forward_records(
        self, ds: Dataset, stage: str, model: ModelBundle, chunk: int = 256
    ) -> tuple[np.ndarray, np.ndarray]:
        """(probabilities, captured activations) for every sample of a stage."""
        key = (ds.id, ds.content_hash(), stage, model.checksum())
        if key not in self._forward_cache:
            X = ds.stage_matrix(stage)
            probs, acts = [], []
            for lo in range(0, X.shape[0], chunk):
                rec = forward_batch(model, X[lo : lo + chunk])
                probs.append(rec.probabilities)
                acts.append(rec.captured_activations)
            self._forward_cache[key] = (np.concatenate(probs), np.concatenate(acts))
        return self._forward_cache[key]

    def attribution_matrix(
        self,
        ds: Dataset,
        stage: str,
        model: ModelBundle,
        method: str,
        params: dict | None = None,
    ) -> attr_mod.AttributionMatrix:
        params = dict(params or {})
        key = ArtifactKey.from_inputs(
            "attribution",
            dataset=ds.id,
            dataset_hash=ds.content_hash(),
            stage=stage,
            method=method,
            params=params,
            model=model.checksum(),
        )
        cached = self.store.get(key)
        if cached is not None:
            rows = unpack_array(cached)
            return attr_mod.AttributionMatrix(method=method, stage=stage, rows=rows)
        mat = attr_mod.attribute_stage(model, ds, stage, method, params)
        # cache the float32 wire form and reload it so cache hits and fresh
        # computations serve byte-identical data
        self.store.put(key, pack_array(mat.rows))
        mat.rows = unpack_array(self.store.get(key))
        return mat

    def base_matrix(
        self,
        ds: Dataset,
        stage: str,
        base: str,
        model: ModelBundle | None,
        method: str | None = None,
    ) -> np.ndarray:
        if base == "raw":
            return ds.stage_matrix(stage)
        if model is None:
            raise PipelineError(f"base {base!r} requires a trained model")
        if base == "activations":
            return self.forward_records(ds, stage, model)[1]
        if base == "attributions":
            if not method:
                raise PipelineError("attribution base requires a method")
            return self.attribution_matrix(ds, stage, model, method).rows
        raise PipelineError(f"invalid clustering base {base!r}")


@dataclass
class OrderingResult:
    ordering_id: str
    doc: dict

    @property
    def permutation(self) -> list[int]:
        return self.doc["permutation"]

    @property
    def score(self) -> float:
        return self.doc["score"]


def _validate_request(stage_names, base: str, method: str | None, distance: str, linkage: str):
    if base not in CLUSTER_BASES:
        raise PipelineError(f"invalid clustering base {base!r}")
    if base == "attributions":
        if method not in attr_mod.METHODS:
            raise PipelineError(f"attribution base requires a method, got {method!r}")
    if distance not in metrics.DISTANCE_KINDS:
        raise PipelineError(f"unknown distance kind {distance!r}")
    if linkage not in hclust.LINKAGES:
        raise PipelineError(f"unknown linkage {linkage!r}")


def compute_ordering(
    ws: Workspace,
    ds: Dataset,
    stage: str,
    base: str,
    distance: str,
    linkage: str,
    method: str | None = None,
    model: ModelBundle | None = None,
) -> OrderingResult:
    """Distance matrix -> dendrogram -> leaf order -> score, cached end to
    end; the artifact fingerprint doubles as the ordering id."""
    _validate_request(ds.stages, base, method, distance, linkage)
    if stage not in ds.stages:
        raise PipelineError(f"unknown stage {stage!r}")
    key_inputs = dict(
        dataset=ds.id,
        dataset_hash=ds.content_hash(),
        stage=stage,
        base=base,
        method=method if base == "attributions" else None,
        distance=distance,
        linkage=linkage,
        model=model.checksum() if (model is not None and base != "raw") else None,
    )
    key = ArtifactKey.from_inputs("ordering", **key_inputs)
    cached = ws.store.get(key)
    if cached is not None:
        return OrderingResult(ordering_id=key.fingerprint, doc=json.loads(cached))

    rows = ws.base_matrix(ds, stage, base, model, method)
    dm = metrics.distance_matrix(rows, distance)
    dg = hclust.agglomerate(dm, linkage)
    ordering = hclust.leaf_order(dg)
    score = hclust.ordering_score(ordering, rows, distance)
    doc = {
        **key_inputs,
        "permutation": ordering.permutation,
        "score": score.mean_neighbor_distance,
        "merges": [[m.left, m.right, m.height, m.size] for m in dg.merges],
    }
    ws.store.put(key, json.dumps(doc, sort_keys=True).encode())
    return OrderingResult(ordering_id=key.fingerprint, doc=doc)


def load_ordering(ws: Workspace, ordering_id: str) -> OrderingResult | None:
    data = ws.store.get(ArtifactKey(kind="ordering", fingerprint=ordering_id))
    if data is None:
        return None
    return OrderingResult(ordering_id=ordering_id, doc=json.loads(data))


def stage_scales(
    ws: Workspace,
    ds: Dataset,
    stage: str,
    model: ModelBundle,
    attribution_method: str,
) -> dict[str, vizdata.ColorScaleSpec]:
    raw = ds.stage_matrix(stage)
    _, acts = ws.forward_records(ds, stage, model)
    attrs = ws.attribution_matrix(ds, stage, model, attribution_method).rows
    stats = vizdata.DatasetStats(
        raw_absmax=float(np.max(np.abs(raw))),
        act_max=float(np.max(acts)),
        attr_absmax=float(np.max(np.abs(attrs))),
    )
    kind = model.layers[model.capture_layer].kind
    activation_kind = kind if kind in ("relu", "sigmoid") else "relu"
    return vizdata.default_scales(stats, activation_kind)


def build_slice(
    ws: Workspace,
    ordering: OrderingResult,
    offset: int,
    count: int,
    attribution_method: str | None = None,
    model: ModelBundle | None = None,
) -> vizdata.PixelMatrixSlice:
    doc = ordering.doc
    ds = ws.dataset(doc["dataset"])
    stage = doc["stage"]
    model = model if model is not None else ws.model(doc["dataset"])
    method = attribution_method or doc.get("method") or "saliency"
    probs, acts = ws.forward_records(ds, stage, model)
    attrs = ws.attribution_matrix(ds, stage, model, method).rows
    scales = stage_scales(ws, ds, stage, model, method)
    return vizdata.assemble_slice(
        raw=ds.stage_matrix(stage),
        activations=acts,
        attributions=attrs,
        probabilities=probs,
        labels=ds.stage_labels(stage),
        ordering_permutation=doc["permutation"],
        scales=scales,
        offset=offset,
        count=count,
        ordering_source={k: doc[k] for k in ("dataset", "stage", "base", "distance", "linkage")},
    )


def stddev_for_base(
    ws: Workspace,
    ordering: OrderingResult,
    base: str,
    method: str | None = None,
    model: ModelBundle | None = None,
) -> np.ndarray:
    doc = ordering.doc
    ds = ws.dataset(doc["dataset"])
    if base not in CLUSTER_BASES:
        raise PipelineError(f"invalid data group {base!r}")
    if base != "raw" and model is None:
        model = ws.model(doc["dataset"])
    rows = ws.base_matrix(ds, doc["stage"], base, model, method or doc.get("method") or "saliency")
    return vizdata.stddev_series(rows, doc["permutation"])
