import numpy as np
import pytest
from conftest import separable_data, write_ucr_dir

from davots.pipeline import (
    CLUSTER_BASES,
    PipelineError,
    Workspace,
    build_slice,
    compute_ordering,
    load_ordering,
    pack_array,
    stddev_for_base,
    unpack_array,
)
from davots.vizdata import GROUP_ORDER


def test_pack_array_round_trip(rng):
    arr = rng.normal(size=(3, 7))
    out = unpack_array(pack_array(arr))
    assert out.shape == (3, 7)
    np.testing.assert_array_equal(out, arr.astype(np.float32).astype(np.float64))


def test_ingest_writes_stage_files_and_meta(tmp_path, rng):
    X, y = separable_data(rng, count=10, length=16)
    raw = write_ucr_dir(tmp_path / "raw", X, y, X, y)
    ws = Workspace(tmp_path / "ws")
    ds = ws.ingest(raw, "demo")
    assert ds.series_length == 16
    target = ws.datasets_dir / "demo"
    assert (target / "meta.json").exists()
    assert (target / "demo_TRAIN.tsv").exists()
    assert (target / "demo_TEST.tsv").exists()
    assert ws.list_datasets() == ["demo"]


def test_dataset_reload_from_disk(tmp_path, rng):
    X, y = separable_data(rng, count=10, length=16)
    raw = write_ucr_dir(tmp_path / "raw", X, y, X, y)
    Workspace(tmp_path / "ws").ingest(raw, "demo")
    # a fresh workspace instance sees the persisted dataset
    fresh = Workspace(tmp_path / "ws")
    ds = fresh.dataset("demo")
    assert ds.series_length == 16
    assert set(ds.stages) == {"train", "test"}


def test_unknown_dataset(tmp_path):
    with pytest.raises(PipelineError, match="unknown dataset"):
        Workspace(tmp_path / "ws").dataset("nope")


def test_model_requires_weights(tmp_path, rng):
    X, y = separable_data(rng, count=6, length=16)
    raw = write_ucr_dir(tmp_path / "raw", X, y, X, y)
    ws = Workspace(tmp_path / "ws")
    ws.ingest(raw, "demo")
    with pytest.raises(PipelineError, match="train first"):
        ws.model("demo")


def test_forward_records_shapes(trained_workspace):
    ws = trained_workspace
    ds = ws.dataset("synth")
    probs, acts = ws.forward_records(ds, "test", ws.model("synth"))
    assert probs.shape == (20, 2)
    assert acts.shape == (20, 64)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-6)


def test_attribution_matrix_cache_hit_is_byte_identical(trained_workspace):
    ws = trained_workspace
    ds = ws.dataset("synth")
    model = ws.model("synth")
    fresh = ws.attribution_matrix(ds, "test", model, "saliency").rows
    cached = ws.attribution_matrix(ds, "test", model, "saliency").rows
    assert fresh.tobytes() == cached.tobytes()


def test_base_matrix_all_bases(trained_workspace):
    ws = trained_workspace
    ds = ws.dataset("synth")
    model = ws.model("synth")
    shapes = {
        "raw": (20, 32),
        "activations": (20, 64),
        "attributions": (20, 32),
    }
    for base in CLUSTER_BASES:
        rows = ws.base_matrix(ds, "test", base, model, "saliency")
        assert rows.shape == shapes[base]


def test_base_matrix_attributions_needs_method(trained_workspace):
    ws = trained_workspace
    ds = ws.dataset("synth")
    with pytest.raises(PipelineError, match="method"):
        ws.base_matrix(ds, "test", "attributions", ws.model("synth"), None)


def order(ws, base="raw", **kw):
    ds = ws.dataset("synth")
    model = None if base == "raw" else ws.model("synth")
    defaults = dict(stage="test", base=base, distance="euclidean", linkage="ward", model=model)
    defaults.update(kw)
    return compute_ordering(ws, ds, **defaults)


def test_compute_ordering_is_valid_permutation(trained_workspace):
    result = order(trained_workspace)
    assert sorted(result.permutation) == list(range(20))
    assert np.isfinite(result.score)
    assert len(result.doc["merges"]) == 19


def test_compute_ordering_idempotent(trained_workspace):
    a = order(trained_workspace, base="attributions", method="saliency")
    b = order(trained_workspace, base="attributions", method="saliency")
    assert a.ordering_id == b.ordering_id
    assert a.doc == b.doc


def test_ordering_id_distinguishes_parameters(trained_workspace):
    ids = {
        order(trained_workspace).ordering_id,
        order(trained_workspace, linkage="single").ordering_id,
        order(trained_workspace, distance="pearson").ordering_id,
        order(trained_workspace, base="activations").ordering_id,
    }
    assert len(ids) == 4


def test_method_ignored_for_non_attribution_bases(trained_workspace):
    a = order(trained_workspace, base="raw", method=None)
    b = order(trained_workspace, base="raw", method="saliency")
    assert a.ordering_id == b.ordering_id


def test_invalid_requests_rejected(trained_workspace):
    with pytest.raises(PipelineError, match="invalid clustering base"):
        order(trained_workspace, base="prediction")
    with pytest.raises(PipelineError, match="method"):
        order(trained_workspace, base="attributions", method=None)
    with pytest.raises(PipelineError, match="distance"):
        order(trained_workspace, distance="cosine")
    with pytest.raises(PipelineError, match="linkage"):
        order(trained_workspace, linkage="median")
    with pytest.raises(PipelineError, match="stage"):
        order(trained_workspace, stage="validation")


def test_load_ordering_round_trip(trained_workspace):
    result = order(trained_workspace)
    loaded = load_ordering(trained_workspace, result.ordering_id)
    assert loaded is not None
    assert loaded.doc == result.doc
    assert load_ordering(trained_workspace, "0" * 64) is None


def test_build_slice_layout(trained_workspace):
    result = order(trained_workspace)
    slc = build_slice(trained_workspace, result, offset=0, count=5)
    widths = slc.group_widths()
    assert [widths[g] for g in GROUP_ORDER] == [32, 32, 64, 32, 32, 32, 2]
    assert slc.sample_indices == result.permutation[:5]


def test_build_slice_window_clamps_nothing_past_end(trained_workspace):
    result = order(trained_workspace)
    from davots.vizdata import VizError

    with pytest.raises(VizError, match="range"):
        build_slice(trained_workspace, result, offset=18, count=5)


def test_stddev_for_base(trained_workspace):
    result = order(trained_workspace)
    for base in CLUSTER_BASES:
        values = stddev_for_base(trained_workspace, result, base)
        assert values.shape == (20,)
        assert np.all(values >= 0) and np.all(np.isfinite(values))
    with pytest.raises(PipelineError):
        stddev_for_base(trained_workspace, result, "prediction")
