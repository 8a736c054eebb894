"""Batch driver: ingest, train, attribute, cluster, measure, render, serve.

Exit codes: 0 success, 1 runtime failure, 2 usage/validation error.
Errors go to stderr as a single ``error: ...`` line; progress also stays
on stderr so stdout remains machine-readable.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from . import attribution, hclust, metrics, pipeline
from .config import Config
from .ingest import IngestError
from .model import ModelError, TrainConfig, build_default_model, save_weights, train, write_training_log
from .vizdata import render_image

VALIDATION_ERRORS = (pipeline.PipelineError, IngestError, ModelError, metrics.MetricError, hclust.ClusterError, ValueError)


def _fail(message: str, code: int) -> None:
    print(f"error: {message}", file=sys.stderr)
    sys.exit(code)


def _workspace(ctx: click.Context) -> pipeline.Workspace:
    return pipeline.Workspace(ctx.obj["config"].cache_dir)


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--cache-dir", type=click.Path(file_okay=False), default=None, help="override cache root")
@click.option("-v", "--verbose", is_flag=True)
@click.pass_context
def main(ctx, config_path, cache_dir, verbose):
    """Dense-pixel time-series model inspection pipeline."""
    cfg = Config.load(config_path)
    if cache_dir:
        cfg.cache_dir = Path(cache_dir)
    ctx.obj = {"config": cfg, "verbose": verbose}


@main.command()
@click.option("--path", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--id", "dataset_id", required=True)
@click.pass_context
def ingest(ctx, path, dataset_id):
    """Validate, z-normalize and register a UCR-format dataset."""
    try:
        ds = _workspace(ctx).ingest(path, dataset_id)
    except VALIDATION_ERRORS as exc:
        _fail(str(exc), 2)
    sizes = ", ".join(f"{s}={len(ds.stages[s])}" for s in sorted(ds.stages))
    click.echo(f"{ds.id}: n={ds.series_length} classes={ds.class_count} {sizes}")


@main.command(name="train")
@click.option("--id", "dataset_id", required=True)
@click.option("--seed", required=True, type=int)
@click.option("--epochs", default=20, type=int, show_default=True)
@click.option("--lr", default=0.01, type=float, show_default=True)
@click.option("--batch-size", default=32, type=int, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="weights file (default: workspace)")
@click.pass_context
def train_cmd(ctx, dataset_id, seed, epochs, lr, batch_size, out):
    """Train the default model; writes weights and a CSV loss log."""
    ws = _workspace(ctx)
    try:
        ds = ws.dataset(dataset_id)
        model = build_default_model(ds.series_length, ds.class_count, seed)
        cfg = TrainConfig(epochs=epochs, batch_size=batch_size, learning_rate=lr, seed=seed)
    except VALIDATION_ERRORS as exc:
        _fail(str(exc), 2)
    try:
        trained, logs = train(model, ds, cfg)
    except ModelError as exc:
        _fail(str(exc), 1)
    out_path = Path(out) if out else ws.default_weights_path(dataset_id)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_bytes(save_weights(trained))
    log_path = out_path.with_suffix(out_path.suffix + ".log.csv")
    write_training_log(logs, log_path)
    last = logs[-1]
    print(f"epoch {last.epoch}: loss={last.loss:.4f} train_acc={last.train_acc:.4f} test_acc={last.test_acc:.4f}", file=sys.stderr)
    click.echo(f"{out_path}")


@main.command()
@click.option("--id", "dataset_id", required=True)
@click.option("--stage", required=True)
@click.option("--weights", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--method", required=True, type=click.Choice(attribution.METHODS))
@click.option("--steps", default=50, type=int, show_default=True, help="integrated-gradients steps")
@click.option("--window", default=8, type=int, show_default=True, help="occlusion window")
@click.pass_context
def attribute(ctx, dataset_id, stage, weights, method, steps, window):
    """Compute a stage attribution matrix into the cache."""
    ws = _workspace(ctx)
    params = {}
    if method == "integrated_gradients":
        params["steps"] = steps
    if method == "occlusion":
        params["window"] = window
    try:
        ds = ws.dataset(dataset_id)
        if stage not in ds.stages:
            raise pipeline.PipelineError(f"unknown stage {stage!r}")
        model = ws.model(dataset_id, weights)
    except VALIDATION_ERRORS as exc:
        _fail(str(exc), 2)
    try:
        mat = ws.attribution_matrix(ds, stage, model, method, params)
    except Exception as exc:
        _fail(str(exc), 1)
    click.echo(f"{method} {stage}: {mat.rows.shape[0]} rows x {mat.rows.shape[1]} points")


def _ordering_from_flags(ctx, dataset_id, stage, base, method, distance, linkage, weights=None):
    ws = _workspace(ctx)
    ds = ws.dataset(dataset_id)
    if stage not in ds.stages:
        raise pipeline.PipelineError(f"unknown stage {stage!r}")
    model = ws.model(dataset_id, weights) if base != "raw" else None
    return ws, ds, model


@main.command()
@click.option("--id", "dataset_id", required=True)
@click.option("--stage", required=True)
@click.option("--base", required=True)
@click.option("--method", default=None, help="attribution method (required for --base attributions)")
@click.option("--distance", required=True, type=click.Choice(metrics.DISTANCE_KINDS))
@click.option("--linkage", required=True, type=click.Choice(hclust.LINKAGES))
@click.option("--weights", type=click.Path(exists=True, dir_okay=False), default=None)
@click.pass_context
def cluster(ctx, dataset_id, stage, base, method, distance, linkage, weights):
    """Compute (or load) an ordering; prints its id and score."""
    if base not in pipeline.CLUSTER_BASES:
        _fail(f"invalid clustering base {base!r}", 2)
    try:
        ws, ds, model = _ordering_from_flags(ctx, dataset_id, stage, base, method, distance, linkage, weights)
        result = pipeline.compute_ordering(
            ws, ds, stage=stage, base=base, distance=distance, linkage=linkage, method=method, model=model
        )
    except VALIDATION_ERRORS as exc:
        _fail(str(exc), 2)
    click.echo(f"{result.ordering_id}\tscore={result.score:.9g}")


@main.command()
@click.option("--id", "dataset_id", required=True)
@click.option("--stage", required=True)
@click.option("--base", required=True)
@click.option("--method", default=None)
@click.option("--distance", required=True, type=click.Choice(metrics.DISTANCE_KINDS))
@click.option("--weights", type=click.Path(exists=True, dir_okay=False), default=None)
@click.pass_context
def measure(ctx, dataset_id, stage, base, method, distance, weights):
    """Score the leaf order of every linkage; marks the best."""
    if base not in pipeline.CLUSTER_BASES:
        _fail(f"invalid clustering base {base!r}", 2)
    try:
        ws, ds, model = _ordering_from_flags(ctx, dataset_id, stage, base, method, distance, None, weights)
        rows = ws.base_matrix(ds, stage, base, model, method)
        dm = metrics.distance_matrix(rows, distance)
        best, scores = hclust.best_linkage(dm, rows, distance)
    except VALIDATION_ERRORS as exc:
        _fail(str(exc), 2)
    for linkage in hclust.LINKAGES:
        marker = " *" if linkage == best else ""
        click.echo(f"{linkage}\t{scores[linkage]:.9g}{marker}")


@main.command()
@click.option("--ordering", "ordering_id", required=True)
@click.option("--offset", default=0, type=int, show_default=True)
@click.option("--count", default=100, type=int, show_default=True)
@click.option("--attribution", "attribution_method", default=None)
@click.option("--cell", nargs=2, default=(1, 1), type=int, show_default=True, help="cell width/height in pixels")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.pass_context
def render(ctx, ordering_id, offset, count, attribution_method, cell, out):
    """Render a slice of an existing ordering to a binary PPM file."""
    ws = _workspace(ctx)
    ordering = pipeline.load_ordering(ws, ordering_id)
    if ordering is None:
        _fail(f"unknown ordering {ordering_id!r}", 2)
    try:
        slc = pipeline.build_slice(ws, ordering, offset, count, attribution_method=attribution_method)
        ppm = render_image(slc, cell=tuple(cell))
    except VALIDATION_ERRORS as exc:
        _fail(str(exc), 2)
    Path(out).write_bytes(ppm)
    click.echo(out)


@main.command()
@click.option("--port", default=None, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.pass_context
def serve(ctx, port, host):
    """Start the HTTP API."""
    import uvicorn

    from .service import create_app

    cfg = ctx.obj["config"]
    app = create_app(_workspace(ctx))
    uvicorn.run(app, host=host, port=port or cfg.port, log_level="info")


if __name__ == "__main__":
    main()
