"""Per-time-point relevance scores for model predictions.

All methods target the model's predicted class for each sample, since the
display explains the model's own decision.  Gradients are taken of the
pre-softmax logit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ingest import Dataset
from .model import ModelBundle, forward_batch, input_gradient_batch

METHODS = ("saliency", "gradient_x_input", "integrated_gradients", "occlusion")


class AttributionError(ValueError):
    pass


@dataclass
class AttributionMatrix:
    method: str
    stage: str
    rows: np.ndarray  # (m, n)
    target_policy: str = "predicted-class"

    def to_bytes(self) -> bytes:
        return np.ascontiguousarray(self.rows, dtype="<f4").tobytes()


def _predicted_classes(m: ModelBundle, X: np.ndarray) -> np.ndarray:
    return forward_batch(m, X).probabilities.argmax(axis=1)


def saliency(m: ModelBundle, x: np.ndarray) -> np.ndarray:
    """|d logit[predicted class] / d x| per time point."""
    return saliency_batch(m, np.asarray(x, dtype=np.float64)[None, :])[0]


def saliency_batch(m: ModelBundle, X: np.ndarray) -> np.ndarray:
    targets = _predicted_classes(m, X)
    return np.abs(input_gradient_batch(m, X, targets))


def gradient_x_input(m: ModelBundle, x: np.ndarray) -> np.ndarray:
    return gradient_x_input_batch(m, np.asarray(x, dtype=np.float64)[None, :])[0]


def gradient_x_input_batch(m: ModelBundle, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    targets = _predicted_classes(m, X)
    return input_gradient_batch(m, X, targets) * X


def integrated_gradients(
    m: ModelBundle,
    x: np.ndarray,
    baseline: np.ndarray | None = None,
    steps: int = 50,
) -> np.ndarray:
    """Midpoint-rule path integral of the gradient from the baseline to x,
    scaled by (x - baseline)."""
    x = np.asarray(x, dtype=np.float64)
    if baseline is None:
        baseline = np.zeros_like(x)
    baseline = np.asarray(baseline, dtype=np.float64)
    if baseline.shape != x.shape:
        raise AttributionError(f"baseline shape {baseline.shape} != input {x.shape}")
    if steps < 1:
        raise AttributionError("steps must be >= 1")
    target = int(_predicted_classes(m, x[None, :])[0])
    ts = (np.arange(steps) + 0.5) / steps
    points = baseline[None, :] + ts[:, None] * (x - baseline)[None, :]
    grads = input_gradient_batch(m, points, np.full(steps, target))
    return (x - baseline) * grads.mean(axis=0)


def occlusion(
    m: ModelBundle,
    x: np.ndarray,
    window: int = 8,
    stride: int = 1,
    fill: float = 0.0,
) -> np.ndarray:
    """Score drop logit(x) - logit(x with a window replaced by ``fill``),
    averaged onto each time point over all windows covering it."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if not 1 <= window <= n:
        raise AttributionError(f"window {window} out of range for length {n}")
    if stride < 1:
        raise AttributionError("stride must be >= 1")
    target = int(_predicted_classes(m, x[None, :])[0])
    base_logit = float(forward_batch(m, x[None, :]).logits[0, target])

    starts = list(range(0, n - window + 1, stride))
    occluded = np.tile(x, (len(starts), 1))
    for row, s in enumerate(starts):
        occluded[row, s : s + window] = fill
    drops = np.empty(len(starts), dtype=np.float64)
    chunk = 256
    for lo in range(0, len(starts), chunk):
        logits = forward_batch(m, occluded[lo : lo + chunk]).logits
        drops[lo : lo + chunk] = base_logit - logits[:, target]

    totals = np.zeros(n, dtype=np.float64)
    counts = np.zeros(n, dtype=np.float64)
    for s, drop in zip(starts, drops):
        totals[s : s + window] += drop
        counts[s : s + window] += 1.0
    covered = counts > 0
    out = np.zeros(n, dtype=np.float64)
    out[covered] = totals[covered] / counts[covered]
    return out


def attribute_stage(
    m: ModelBundle, d: Dataset, stage: str, method: str, params: dict | None = None
) -> AttributionMatrix:
    """Apply one method to every sample of a stage, targeting each sample's
    predicted class."""
    if method not in METHODS:
        raise AttributionError(f"unknown attribution method {method!r}")
    params = dict(params or {})
    X = d.stage_matrix(stage)
    if method == "saliency":
        rows = saliency_batch(m, X)
    elif method == "gradient_x_input":
        rows = gradient_x_input_batch(m, X)
    elif method == "integrated_gradients":
        steps = int(params.get("steps", 50))
        rows = np.stack([integrated_gradients(m, x, steps=steps) for x in X])
    else:
        window = int(params.get("window", 8))
        stride = int(params.get("stride", 1))
        fill = float(params.get("fill", 0.0))
        rows = np.stack([occlusion(m, x, window=window, stride=stride, fill=fill) for x in X])
    if not np.all(np.isfinite(rows)):
        raise AttributionError("non-finite attribution")
    return AttributionMatrix(method=method, stage=stage, rows=rows)
