import json
import threading

import pytest

from davots.store import ArtifactKey, ArtifactStore, StoreError


@pytest.fixture
def store(tmp_path):
    return ArtifactStore(tmp_path / "cache")


def key(**inputs):
    return ArtifactKey.from_inputs("test", **inputs)


def test_put_get_round_trip(store):
    k = key(dataset="a", stage="train")
    store.put(k, b"hello")
    assert store.get(k) == b"hello"


def test_get_absent_returns_none(store):
    assert store.get(key(dataset="nope")) is None


def test_put_idempotent(store):
    k = key(dataset="a")
    p1 = store.put(k, b"payload")
    p2 = store.put(k, b"payload")
    assert p1 == p2
    assert store.get(k) == b"payload"


def test_key_is_input_sensitive():
    a = key(dataset="x", stage="train")
    b = key(dataset="x", stage="test")
    c = key(stage="train", dataset="x")  # order-insensitive
    assert a.fingerprint != b.fingerprint
    assert a.fingerprint == c.fingerprint


def test_layout_is_sharded(store):
    k = key(dataset="a")
    path = store.put(k, b"data")
    assert path.parent.name == k.fingerprint[:2]
    assert path.parent.parent.name == "test"
    assert path.with_name(f"{k.fingerprint}.manifest.json").exists()


def test_corrupted_artifact_detected(store):
    k = key(dataset="a")
    path = store.put(k, b"data")
    path.write_bytes(b"tampered")
    with pytest.raises(StoreError, match="checksum"):
        store.get(k)


def test_invalidate_by_dataset(store):
    ka = key(dataset="a", stage="train")
    kb = key(dataset="b", stage="train")
    store.put(ka, b"1")
    store.put(kb, b"2")
    removed = store.invalidate("a")
    assert removed == 1
    assert store.get(ka) is None
    assert store.get(kb) == b"2"


def test_manifest_records_inputs(store):
    k = key(dataset="a", stage="train")
    path = store.put(k, b"data")
    manifest = json.loads(path.with_name(f"{k.fingerprint}.manifest.json").read_text())
    assert manifest["inputs"] == {"dataset": "a", "stage": "train"}
    assert manifest["size"] == 4


def test_concurrent_put_single_artifact(store):
    k = key(dataset="race")
    errors = []

    def worker():
        try:
            store.put(k, b"same-bytes")
        except Exception as exc:  # pragma: no cover
            errors.append(exc)

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    assert store.get(k) == b"same-bytes"
    shard = store.root / "test" / k.fingerprint[:2]
    assert sorted(p.name for p in shard.iterdir()) == sorted(
        [k.fingerprint, f"{k.fingerprint}.manifest.json"]
    )
