import numpy as np
import pytest

from davots.ingest import Dataset, Sample
from davots.model import LayerSpec, ModelBundle, build_default_model


def make_dataset(X_train, y_train, X_test=None, y_test=None, dataset_id="synth"):
    X_train = np.asarray(X_train, dtype=np.float64)
    stages = {
        "train": [
            Sample(index=i, values=X_train[i], label=int(y_train[i]))
            for i in range(X_train.shape[0])
        ]
    }
    if X_test is not None:
        X_test = np.asarray(X_test, dtype=np.float64)
        stages["test"] = [
            Sample(index=i, values=X_test[i], label=int(y_test[i]))
            for i in range(X_test.shape[0])
        ]
    labels = list(y_train) + (list(y_test) if y_test is not None else [])
    return Dataset(
        id=dataset_id,
        series_length=X_train.shape[1],
        class_count=int(max(labels)) + 1,
        stages=stages,
    )


def separable_data(rng, count, length, gap=3.0):
    """Two classes separated by a constant level shift; trivially learnable."""
    half = count // 2
    X = rng.normal(scale=0.3, size=(count, length))
    y = np.zeros(count, dtype=np.int64)
    X[half:] += gap
    y[half:] = 1
    return X, y


def linear_model(W, b=None):
    """flatten -> dense(C) on the raw series; logits = x @ W + b."""
    W = np.asarray(W, dtype=np.float32)
    n, C = W.shape
    if b is None:
        b = np.zeros(C, dtype=np.float32)
    return ModelBundle(
        layers=[LayerSpec("flatten"), LayerSpec("dense", units=C)],
        weights={1: {"W": W, "b": np.asarray(b, dtype=np.float32)}},
        capture_layer=1,
        class_count=C,
        input_length=n,
    )


def random_small_model(rng, n=24, C=3):
    return build_default_model(n, C, seed=int(rng.integers(0, 2**31)))


def finite_difference_gradient(model, x, class_index, h=1e-4):
    from davots.model import forward

    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        out[i] = (
            forward(model, xp).logits[class_index] - forward(model, xm).logits[class_index]
        ) / (2 * h)
    return out


def gradient_check(model, x, class_index, rel_tol=1e-4):
    """Backprop vs central differences over the coordinates with
    |g| > 1e-8.  Returns (passing count, checked count) so callers can pool
    coordinates across models."""
    from davots.model import input_gradient

    g = input_gradient(model, x, class_index)
    fd = finite_difference_gradient(model, x, class_index)
    mask = np.abs(g) > 1e-8
    if not mask.any():
        return 0, 0
    rel = np.abs(g[mask] - fd[mask]) / np.maximum(np.abs(fd[mask]), 1e-12)
    return int(np.sum(rel <= rel_tol)), int(mask.sum())


# ---------------------------------------------------------------------------
# naive O(m^3) agglomeration reference: inter-cluster distances recomputed
# from the original matrix at every step


def _cluster_distance(D, a, b, linkage):
    pair = D[np.ix_(sorted(a), sorted(b))]
    if linkage == "single":
        return pair.min()
    if linkage == "complete":
        return pair.max()
    if linkage == "average":
        return pair.mean()
    # ward closed form over squared input distances
    D2 = D * D
    na, nb = len(a), len(b)
    t_ab = D2[np.ix_(sorted(a), sorted(b))].sum()
    t_aa = D2[np.ix_(sorted(a), sorted(a))].sum()
    t_bb = D2[np.ix_(sorted(b), sorted(b))].sum()
    centroid_gap = t_ab / (na * nb) - t_aa / (2 * na * na) - t_bb / (2 * nb * nb)
    return np.sqrt(max(0.0, 2.0 * na * nb / (na + nb) * centroid_gap))


def naive_agglomerate(dm, linkage):
    """Brute-force reference with the same tie-break: clusters keyed by
    their smallest leaf, scan pairs in (min key, max key) order, strict <."""
    D = dm.full()
    m = dm.size
    clusters = [{"key": i, "node": i, "leaves": {i}} for i in range(m)]
    merges = []
    for t in range(m - 1):
        best = None
        best_pair = None
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                d = _cluster_distance(D, clusters[i]["leaves"], clusters[j]["leaves"], linkage)
                if best is None or d < best:
                    best = d
                    best_pair = (i, j)
        i, j = best_pair
        left, right = clusters[i], clusters[j]
        merged = {
            "key": left["key"],
            "node": m + t,
            "leaves": left["leaves"] | right["leaves"],
        }
        merges.append((left["node"], right["node"], float(best), len(merged["leaves"])))
        clusters = [c for k, c in enumerate(clusters) if k not in (i, j)]
        clusters.append(merged)
        clusters.sort(key=lambda c: c["key"])
    return merges


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def write_ucr_dir(path, X_train, y_train, X_test, y_test, name="SYN"):
    path.mkdir(parents=True, exist_ok=True)
    for suffix, X, y in (("TRAIN", X_train, y_train), ("TEST", X_test, y_test)):
        lines = []
        for i in range(len(X)):
            lines.append("\t".join([str(int(y[i]))] + [f"{v:.17g}" for v in X[i]]))
        (path / f"{name}_{suffix}.tsv").write_text("\n".join(lines) + "\n")
    return path


def parse_ppm_bytes(data):
    assert data.startswith(b"P6\n")
    header, _, rest = data.partition(b"255\n")
    dims = header.split(b"\n")[1].split()
    w, h = int(dims[0]), int(dims[1])
    pixels = np.frombuffer(rest, dtype=np.uint8).reshape(h, w, 3)
    return w, h, pixels


@pytest.fixture(scope="session")
def trained_workspace(tmp_path_factory):
    """Workspace with a small ingested dataset and a trained model."""
    from davots.model import TrainConfig, build_default_model, save_weights, train
    from davots.pipeline import Workspace

    root = tmp_path_factory.mktemp("ws")
    rng = np.random.default_rng(777)
    X_train, y_train = separable_data(rng, count=40, length=32)
    X_test, y_test = separable_data(rng, count=20, length=32)
    raw = write_ucr_dir(root / "raw", X_train, y_train, X_test, y_test)

    ws = Workspace(root / "workspace")
    ds = ws.ingest(raw, "synth")
    model = build_default_model(ds.series_length, ds.class_count, seed=5)
    trained, _ = train(model, ds, TrainConfig(epochs=8, batch_size=10, learning_rate=0.05, seed=5))
    ws.default_weights_path("synth").write_bytes(save_weights(trained))
    return ws
