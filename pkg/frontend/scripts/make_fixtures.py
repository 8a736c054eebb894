"""Regenerate the stubbed-API fixtures under tests/fixtures from a live
in-process service instance, so the contract tests compare the client
against genuine server output (including a rendered PPM).

Usage: python3 frontend/scripts/make_fixtures.py
"""

import json
import sys
import tempfile
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient

from davots.model import TrainConfig, build_default_model, save_weights, train
from davots.pipeline import Workspace
from davots.service import create_app

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def build_workspace(root: Path) -> Workspace:
    rng = np.random.default_rng(777)
    length, gap = 32, 3.0

    def split(count):
        half = count // 2
        X = rng.normal(scale=0.3, size=(count, length))
        y = np.zeros(count, dtype=np.int64)
        X[half:] += gap
        y[half:] = 1
        return X, y

    raw = root / "raw"
    raw.mkdir(parents=True)
    for suffix, (X, y) in (("TRAIN", split(40)), ("TEST", split(20))):
        lines = ["\t".join([str(int(y[i]))] + [f"{v:.17g}" for v in X[i]]) for i in range(len(X))]
        (raw / f"SYN_{suffix}.tsv").write_text("\n".join(lines) + "\n")

    ws = Workspace(root / "ws")
    ds = ws.ingest(raw, "synth")
    model = build_default_model(ds.series_length, ds.class_count, seed=5)
    trained, _ = train(model, ds, TrainConfig(epochs=8, batch_size=10, learning_rate=0.05, seed=5))
    ws.default_weights_path("synth").write_bytes(save_weights(trained))
    return ws


def main() -> int:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        client = TestClient(create_app(build_workspace(Path(tmp))))
        body = {
            "dataset": "synth",
            "stage": "test",
            "base": "attributions",
            "method": "saliency",
            "distance": "norm_euclidean",
            "linkage": "ward",
        }
        ordering = client.post("/api/orderings", json=body).json()
        params = {"ordering_id": ordering["ordering_id"], "offset": 0, "count": 10}
        dump = {
            "meta.json": client.get("/api/meta").json(),
            "ordering.json": ordering,
            "slice.json": client.get("/api/slice", params=params).json(),
            "stddev.json": client.get(
                "/api/stddev", params={"ordering_id": ordering["ordering_id"], "base": "raw"}
            ).json(),
        }
        for name, doc in dump.items():
            (FIXTURES / name).write_text(json.dumps(doc, indent=1, sort_keys=True))
        (FIXTURES / "ordering_request.json").write_text(json.dumps(body, indent=1))
        (FIXTURES / "render.ppm").write_bytes(client.get("/api/render", params=params).content)
    print(f"wrote fixtures to {FIXTURES}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
