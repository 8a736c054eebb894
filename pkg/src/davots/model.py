"""A small 1D CNN with explicit forward, backprop and input gradients.

Everything is numpy: weights are stored float32, all math runs in float64
so forward passes, gradients and training are bit-reproducible given the
seeds.  The hidden dense layer after global average pooling is the
"capture" layer whose post-activation vector feeds the activations column
of the pixel display.
"""

from __future__ import annotations

import hashlib
import io
import json
import zlib
from dataclasses import dataclass, field

import numpy as np

from .ingest import Dataset


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # conv1d | relu | global_average_pool | flatten | dense | softmax | sigmoid
    kernel: int = 0
    channels: int = 0
    units: int = 0


@dataclass
class ForwardRecord:
    logits: np.ndarray
    probabilities: np.ndarray
    captured_activations: np.ndarray


@dataclass
class ModelBundle:
    layers: list[LayerSpec]
    weights: dict[int, dict[str, np.ndarray]]  # layer index -> {"W", "b"} (float32)
    capture_layer: int  # index of the layer whose *output* is captured
    class_count: int
    input_length: int
    _checksum: str | None = field(default=None, repr=False)

    def checksum(self) -> str:
        if self._checksum is None:
            self._checksum = hashlib.sha256(save_weights(self)).hexdigest()
        return self._checksum

    def invalidate_checksum(self) -> None:
        self._checksum = None


def _same_pad(k: int) -> tuple[int, int]:
    # stride-1 "same" padding; even kernels pad one more on the right
    return (k - 1) // 2, k // 2


def build_default_model(n: int, C: int, seed: int) -> ModelBundle:
    """conv1d(8,16)-relu-conv1d(5,32)-relu-gap-dense(64)-relu-dense(C)-softmax
    with Glorot-uniform init from a seeded generator.  The capture layer is
    the ReLU after dense(64)."""
    if n < 16:
        raise ModelError(f"input length {n} too short for the default kernel chain")
    layers = [
        LayerSpec("conv1d", kernel=8, channels=16),
        LayerSpec("relu"),
        LayerSpec("conv1d", kernel=5, channels=32),
        LayerSpec("relu"),
        LayerSpec("global_average_pool"),
        LayerSpec("dense", units=64),
        LayerSpec("relu"),
        LayerSpec("dense", units=C),
        LayerSpec("softmax"),
    ]
    rng = np.random.default_rng(seed)
    weights: dict[int, dict[str, np.ndarray]] = {}
    c_in = 1
    width = n
    for idx, spec in enumerate(layers):
        if spec.kind == "conv1d":
            fan_in = spec.kernel * c_in
            fan_out = spec.kernel * spec.channels
            s = np.sqrt(6.0 / (fan_in + fan_out))
            W = rng.uniform(-s, s, size=(spec.kernel, c_in, spec.channels))
            weights[idx] = {"W": W.astype(np.float32), "b": np.zeros(spec.channels, np.float32)}
            c_in = spec.channels
        elif spec.kind == "global_average_pool":
            width = c_in
        elif spec.kind == "dense":
            fan_in, fan_out = width, spec.units
            s = np.sqrt(6.0 / (fan_in + fan_out))
            W = rng.uniform(-s, s, size=(fan_in, spec.units))
            weights[idx] = {"W": W.astype(np.float32), "b": np.zeros(spec.units, np.float32)}
            width = spec.units
    return ModelBundle(
        layers=layers, weights=weights, capture_layer=6, class_count=C, input_length=n
    )


# ---------------------------------------------------------------------------
# forward / backward primitives; x is (batch, length, channels) until the
# pooling layer, then (batch, features)


def _conv_forward(x: np.ndarray, W: np.ndarray, b: np.ndarray) -> np.ndarray:
    k = W.shape[0]
    pl, pr = _same_pad(k)
    xp = np.pad(x, ((0, 0), (pl, pr), (0, 0)))
    win = np.lib.stride_tricks.sliding_window_view(xp, k, axis=1)  # (B, n, c_in, k)
    return np.einsum("bnik,kio->bno", win, W, optimize=True) + b


def _conv_backward(
    x: np.ndarray, W: np.ndarray, dy: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    k = W.shape[0]
    pl, pr = _same_pad(k)
    xp = np.pad(x, ((0, 0), (pl, pr), (0, 0)))
    win = np.lib.stride_tricks.sliding_window_view(xp, k, axis=1)
    dW = np.einsum("bnik,bno->kio", win, dy, optimize=True)
    db = dy.sum(axis=(0, 1))
    # transposed convolution: correlate dy with the kernel flipped along k
    dyp = np.pad(dy, ((0, 0), (pr, pl), (0, 0)))
    dwin = np.lib.stride_tricks.sliding_window_view(dyp, k, axis=1)  # (B, n, c_out, k)
    dx = np.einsum("bnok,kio->bni", dwin, W[::-1], optimize=True)
    return dx, dW, db


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _forward_all(m: ModelBundle, X: np.ndarray) -> list[np.ndarray]:
    """Outputs of every layer (float64), input included at position 0."""
    a = np.asarray(X, dtype=np.float64)
    if a.ndim == 2:
        a = a[:, :, None]
    outs = [a]
    for idx, spec in enumerate(m.layers):
        if spec.kind == "conv1d":
            w = m.weights[idx]
            a = _conv_forward(a, w["W"].astype(np.float64), w["b"].astype(np.float64))
        elif spec.kind == "relu":
            a = np.maximum(a, 0.0)
        elif spec.kind == "sigmoid":
            a = 1.0 / (1.0 + np.exp(-a))
        elif spec.kind == "global_average_pool":
            a = a.mean(axis=1)
        elif spec.kind == "flatten":
            a = a.reshape(a.shape[0], -1)
        elif spec.kind == "dense":
            w = m.weights[idx]
            a = a @ w["W"].astype(np.float64) + w["b"].astype(np.float64)
        elif spec.kind == "softmax":
            a = _softmax(a)
        else:
            raise ModelError(f"unknown layer kind {spec.kind!r}")
        outs.append(a)
    return outs


def _logit_layer(m: ModelBundle) -> int:
    for idx in range(len(m.layers) - 1, -1, -1):
        if m.layers[idx].kind == "softmax":
            return idx - 1
    return len(m.layers) - 1


def _backward(
    m: ModelBundle, outs: list[np.ndarray], dlogits: np.ndarray, want_params: bool
) -> tuple[np.ndarray, dict[int, dict[str, np.ndarray]]]:
    """Backprop from the pre-softmax logits down to the input."""
    grads: dict[int, dict[str, np.ndarray]] = {}
    g = dlogits
    for idx in range(_logit_layer(m), -1, -1):
        spec = m.layers[idx]
        x_in = outs[idx]
        if spec.kind == "conv1d":
            dx, dW, db = _conv_backward(x_in, m.weights[idx]["W"].astype(np.float64), g)
            if want_params:
                grads[idx] = {"W": dW, "b": db}
            g = dx
        elif spec.kind == "relu":
            g = g * (x_in > 0.0)
        elif spec.kind == "sigmoid":
            y = outs[idx + 1]
            g = g * y * (1.0 - y)
        elif spec.kind == "global_average_pool":
            B, n, c = x_in.shape
            g = np.repeat(g[:, None, :], n, axis=1) / n
        elif spec.kind == "flatten":
            g = g.reshape(x_in.shape)
        elif spec.kind == "dense":
            W = m.weights[idx]["W"].astype(np.float64)
            if want_params:
                grads[idx] = {"W": x_in.T @ g, "b": g.sum(axis=0)}
            g = g @ W.T
        elif spec.kind == "softmax":
            raise ModelError("backward started above softmax")
    return g, grads


def forward_batch(m: ModelBundle, X: np.ndarray) -> ForwardRecord:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != m.input_length:
        raise ModelError(f"input length {X.shape[1]} != {m.input_length}")
    if not np.all(np.isfinite(X)):
        raise ModelError("non-finite input")
    outs = _forward_all(m, X)
    logits = outs[_logit_layer(m) + 1]
    probs = outs[-1] if m.layers[-1].kind == "softmax" else _softmax(logits)
    captured = outs[m.capture_layer + 1]
    return ForwardRecord(logits=logits, probabilities=probs, captured_activations=captured)


def forward(m: ModelBundle, x: np.ndarray) -> ForwardRecord:
    rec = forward_batch(m, np.asarray(x, dtype=np.float64)[None, :])
    return ForwardRecord(
        logits=rec.logits[0],
        probabilities=rec.probabilities[0],
        captured_activations=rec.captured_activations[0],
    )


def input_gradient_batch(m: ModelBundle, X: np.ndarray, class_indices: np.ndarray) -> np.ndarray:
    """d logit[class] / d input per sample (gradient of the pre-softmax
    logit, not the probability)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    class_indices = np.atleast_1d(np.asarray(class_indices, dtype=np.int64))
    if np.any(class_indices < 0) or np.any(class_indices >= m.class_count):
        raise ModelError("class index out of range")
    outs = _forward_all(m, X)
    logits = outs[_logit_layer(m) + 1]
    dlogits = np.zeros_like(logits)
    dlogits[np.arange(X.shape[0]), class_indices] = 1.0
    g, _ = _backward(m, outs, dlogits, want_params=False)
    return g[:, :, 0]


def input_gradient(m: ModelBundle, x: np.ndarray, class_index: int) -> np.ndarray:
    return input_gradient_batch(m, np.asarray(x)[None, :], np.array([class_index]))[0]


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainConfig:
    epochs: int
    batch_size: int
    learning_rate: float
    seed: int


@dataclass
class EpochLog:
    epoch: int
    loss: float
    train_acc: float
    test_acc: float


def _accuracy(m: ModelBundle, X: np.ndarray, y: np.ndarray, chunk: int = 256) -> float:
    hits = 0
    for lo in range(0, X.shape[0], chunk):
        rec = forward_batch(m, X[lo : lo + chunk])
        hits += int(np.sum(rec.probabilities.argmax(axis=1) == y[lo : lo + chunk]))
    return hits / X.shape[0]


def train(m: ModelBundle, d: Dataset, cfg: TrainConfig) -> tuple[ModelBundle, list[EpochLog]]:
    """Cross-entropy minimization with plain SGD; deterministic given the
    weight and shuffle seeds."""
    if "train" not in d.stages:
        raise ModelError('dataset has no "train" stage')
    X = d.stage_matrix("train")
    y = d.stage_labels("train")
    has_test = "test" in d.stages
    if has_test:
        Xt, yt = d.stage_matrix("test"), d.stage_labels("test")

    model = ModelBundle(
        layers=list(m.layers),
        weights={i: {k: v.copy() for k, v in w.items()} for i, w in m.weights.items()},
        capture_layer=m.capture_layer,
        class_count=m.class_count,
        input_length=m.input_length,
    )
    rng = np.random.default_rng(cfg.seed)
    logs: list[EpochLog] = []
    count = X.shape[0]
    for epoch in range(cfg.epochs):
        order = rng.permutation(count)
        total_loss = 0.0
        for b, lo in enumerate(range(0, count, cfg.batch_size)):
            idx = order[lo : lo + cfg.batch_size]
            xb, yb = X[idx], y[idx]
            outs = _forward_all(model, xb)
            logits = outs[_logit_layer(model) + 1]
            probs = _softmax(logits)
            eps = 1e-12
            loss = -np.mean(np.log(probs[np.arange(len(idx)), yb] + eps))
            if not np.isfinite(loss):
                raise ModelError(f"non-finite loss at epoch {epoch}, batch {b}")
            total_loss += float(loss) * len(idx)
            dlogits = probs.copy()
            dlogits[np.arange(len(idx)), yb] -= 1.0
            dlogits /= len(idx)
            _, grads = _backward(model, outs, dlogits, want_params=True)
            if cfg.learning_rate != 0.0:
                for li, g in grads.items():
                    w = model.weights[li]
                    for name in ("W", "b"):
                        updated = w[name].astype(np.float64) - cfg.learning_rate * g[name]
                        w[name] = updated.astype(np.float32)
        logs.append(
            EpochLog(
                epoch=epoch,
                loss=total_loss / count,
                train_acc=_accuracy(model, X, y),
                test_acc=_accuracy(model, Xt, yt) if has_test else float("nan"),
            )
        )
    model.invalidate_checksum()
    return model, logs


def write_training_log(logs: list[EpochLog], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,loss,train_acc,test_acc\n")
        for e in logs:
            fh.write(f"{e.epoch},{e.loss:.9g},{e.train_acc:.9g},{e.test_acc:.9g}\n")


# ---------------------------------------------------------------------------
# weight serialization: JSON manifest + little-endian float32 blob + CRC32


def save_weights(m: ModelBundle) -> bytes:
    blob = io.BytesIO()
    entries = []
    offset = 0
    for idx in sorted(m.weights):
        for name in ("W", "b"):
            arr = np.ascontiguousarray(m.weights[idx][name], dtype="<f4")
            raw = arr.tobytes()
            entries.append(
                {"layer": idx, "param": name, "shape": list(arr.shape), "offset": offset}
            )
            blob.write(raw)
            offset += len(raw)
    manifest = {
        "format": "davots-weights-v1",
        "layers": [
            {"kind": s.kind, "kernel": s.kernel, "channels": s.channels, "units": s.units}
            for s in m.layers
        ],
        "capture_layer": m.capture_layer,
        "class_count": m.class_count,
        "input_length": m.input_length,
        "tensors": entries,
        "blob_size": offset,
    }
    mbytes = json.dumps(manifest, sort_keys=True).encode()
    body = blob.getvalue()
    out = io.BytesIO()
    out.write(len(mbytes).to_bytes(8, "little"))
    out.write(mbytes)
    out.write(body)
    out.write(zlib.crc32(body).to_bytes(4, "little"))
    return out.getvalue()


def load_weights(data: bytes) -> ModelBundle:
    if len(data) < 12:
        raise ModelError("weights file truncated")
    mlen = int.from_bytes(data[:8], "little")
    if len(data) < 8 + mlen + 4:
        raise ModelError("weights file truncated")
    manifest = json.loads(data[8 : 8 + mlen])
    body = data[8 + mlen : -4]
    crc = int.from_bytes(data[-4:], "little")
    if manifest.get("blob_size") != len(body) or zlib.crc32(body) != crc:
        raise ModelError("weights checksum mismatch")
    layers = [
        LayerSpec(kind=l["kind"], kernel=l["kernel"], channels=l["channels"], units=l["units"])
        for l in manifest["layers"]
    ]
    weights: dict[int, dict[str, np.ndarray]] = {}
    for e in manifest["tensors"]:
        shape = tuple(e["shape"])
        size = int(np.prod(shape)) * 4
        raw = body[e["offset"] : e["offset"] + size]
        if len(raw) != size:
            raise ModelError(f"layer {e['layer']} param {e['param']}: blob out of bounds")
        arr = np.frombuffer(raw, dtype="<f4").reshape(shape)
        weights.setdefault(e["layer"], {})[e["param"]] = arr.copy()
    m = ModelBundle(
        layers=layers,
        weights=weights,
        capture_layer=manifest["capture_layer"],
        class_count=manifest["class_count"],
        input_length=manifest["input_length"],
    )
    _check_shapes(m)
    return m


def _check_shapes(m: ModelBundle) -> None:
    c_in, width = 1, m.input_length
    for idx, spec in enumerate(m.layers):
        if spec.kind == "conv1d":
            want = (spec.kernel, c_in, spec.channels)
            got = m.weights[idx]["W"].shape
            if got != want:
                raise ModelError(f"layer {idx} (conv1d): shape {got} != manifest chain {want}")
            c_in = spec.channels
        elif spec.kind == "global_average_pool":
            width = c_in
        elif spec.kind == "flatten":
            width = m.input_length * c_in
        elif spec.kind == "dense":
            want = (width, spec.units)
            got = m.weights[idx]["W"].shape
            if got != want:
                raise ModelError(f"layer {idx} (dense): shape {got} != manifest chain {want}")
            width = spec.units
