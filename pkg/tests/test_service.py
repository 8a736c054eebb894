import base64

import numpy as np
import pytest
from fastapi.testclient import TestClient

from davots.service import DEFAULT_WINDOW, create_app
from davots.vizdata import GROUP_ORDER


@pytest.fixture(scope="module")
def client(trained_workspace):
    return TestClient(create_app(trained_workspace))


def post_ordering(client, **overrides):
    body = {
        "dataset": "synth",
        "stage": "test",
        "base": "raw",
        "distance": "euclidean",
        "linkage": "ward",
    }
    body.update(overrides)
    return client.post("/api/orderings", json=body)


def decode(doc):
    raw = base64.b64decode(doc["data"])
    assert doc["dtype"] == "float32" and doc["endianness"] == "little"
    return np.frombuffer(raw, dtype="<f4").reshape(doc["shape"])


def test_meta_document(client):
    meta = client.get("/api/meta").json()
    assert meta["defaults"]["window"] == DEFAULT_WINDOW == 100
    assert meta["datasets"]["synth"]["stages"] == ["test", "train"]
    assert meta["datasets"]["synth"]["has_model"] is True
    assert meta["cluster_bases"] == ["raw", "activations", "attributions"]
    assert "prediction" not in meta["cluster_bases"]
    assert set(meta["attribution_methods"]) == {
        "saliency",
        "gradient_x_input",
        "integrated_gradients",
        "occlusion",
    }
    assert meta["linkages"] == ["ward", "complete", "average", "single"]
    assert meta["distance_kinds"] == ["euclidean", "norm_euclidean", "pearson"]


def test_orderings_returns_permutation(client):
    resp = post_ordering(client)
    assert resp.status_code == 200
    doc = resp.json()
    assert sorted(doc["permutation"]) == list(range(20))
    assert np.isfinite(doc["score"])


def test_orderings_idempotent(client):
    a = post_ordering(client, base="attributions", method="saliency").json()
    b = post_ordering(client, base="attributions", method="saliency").json()
    assert a == b


def test_orderings_unknown_dataset_404(client):
    assert post_ordering(client, dataset="missing").status_code == 404


def test_orderings_unknown_stage_404(client):
    assert post_ordering(client, stage="validation").status_code == 404


def test_orderings_bad_parameters_400(client):
    assert post_ordering(client, base="prediction").status_code == 400
    assert post_ordering(client, base="attributions", method=None).status_code == 400
    assert post_ordering(client, distance="cosine").status_code == 400
    assert post_ordering(client, linkage="median").status_code == 400


@pytest.fixture(scope="module")
def ordering_id(client):
    return post_ordering(client).json()["ordering_id"]


def test_slice_document_shape(client, ordering_id):
    resp = client.get("/api/slice", params={"ordering_id": ordering_id, "offset": 0, "count": 5})
    assert resp.status_code == 200
    doc = resp.json()
    assert doc["group_order"] == list(GROUP_ORDER)
    widths = [32, 32, 64, 32, 32, 32, 2]
    for name, width in zip(GROUP_ORDER, widths):
        block = decode(doc["groups"][name])
        assert block.shape == (5, width)
        assert block.min() >= 0.0 and block.max() <= 1.0
    assert len(doc["sample_indices"]) == len(doc["labels"]) == 5
    for name in GROUP_ORDER:
        assert doc["scales"][name]["kind"] in ("sequential", "diverging")


def test_slice_matches_ordering_permutation(client, ordering_id):
    perm = post_ordering(client).json()["permutation"]
    doc = client.get(
        "/api/slice", params={"ordering_id": ordering_id, "offset": 3, "count": 4}
    ).json()
    assert doc["sample_indices"] == perm[3:7]


def test_slice_unknown_ordering_404(client):
    resp = client.get("/api/slice", params={"ordering_id": "f" * 64, "count": 1})
    assert resp.status_code == 404


def test_slice_over_range_416(client, ordering_id):
    resp = client.get("/api/slice", params={"ordering_id": ordering_id, "offset": 18, "count": 5})
    assert resp.status_code == 416


def test_slice_bad_attribution_400(client, ordering_id):
    resp = client.get(
        "/api/slice", params={"ordering_id": ordering_id, "count": 2, "attribution": "lime"}
    )
    assert resp.status_code == 400


def test_slice_negative_offset_400(client, ordering_id):
    resp = client.get("/api/slice", params={"ordering_id": ordering_id, "offset": -1, "count": 2})
    assert resp.status_code == 400


def test_stddev_endpoint(client, ordering_id):
    resp = client.get("/api/stddev", params={"ordering_id": ordering_id, "base": "raw"})
    assert resp.status_code == 200
    doc = resp.json()
    assert len(doc["values"]) == 20
    assert all(v >= 0 for v in doc["values"])
    assert sorted(doc["permutation"]) == list(range(20))


def test_stddev_invalid_base_400(client, ordering_id):
    resp = client.get("/api/stddev", params={"ordering_id": ordering_id, "base": "prediction"})
    assert resp.status_code == 400


def test_render_content_type_and_header(client, ordering_id):
    resp = client.get("/api/render", params={"ordering_id": ordering_id, "count": 4})
    assert resp.status_code == 200
    assert resp.headers["content-type"].startswith("image/x-portable-pixmap")
    assert resp.content.startswith(b"P6\n")


def test_render_deterministic_across_requests(client, ordering_id):
    params = {"ordering_id": ordering_id, "count": 6, "cell_w": 2, "cell_h": 2}
    a = client.get("/api/render", params=params).content
    b = client.get("/api/render", params=params).content
    assert a == b


def test_render_rgb_matches_slice_scales(client, ordering_id):
    """Decoding a slice and applying its own color scales reproduces the
    server-rendered pixels."""
    from conftest import parse_ppm_bytes

    from davots.vizdata import ColorScaleSpec

    params = {"ordering_id": ordering_id, "offset": 0, "count": 3}
    doc = client.get("/api/slice", params=params).json()
    ppm = client.get("/api/render", params=params).content
    _, _, pixels = parse_ppm_bytes(ppm)
    x = 0
    for name in GROUP_ORDER:
        block = decode(doc["groups"][name])
        scale = ColorScaleSpec.from_doc(doc["scales"][name])
        for col in range(block.shape[1]):
            for row in range(block.shape[0]):
                expected = scale.color(float(block[row, col]))
                assert tuple(pixels[row, x + col]) == expected
        x += block.shape[1] + 1  # one-pixel gutter after each group
