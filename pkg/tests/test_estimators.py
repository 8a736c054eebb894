import numpy as np
import pytest
from conftest import separable_data
from sklearn.base import clone
from sklearn.pipeline import make_pipeline

from davots.estimators import (
    AgglomerativeOrdering,
    ConvNetTimeSeriesClassifier,
    TimeSeriesZNormalizer,
)


def test_normalizer_rows_standardized(rng):
    X = rng.normal(loc=5, scale=3, size=(6, 40))
    out = TimeSeriesZNormalizer().fit_transform(X)
    np.testing.assert_allclose(out.mean(axis=1), 0.0, atol=1e-12)
    np.testing.assert_allclose(out.std(axis=1), 1.0, atol=1e-12)


def test_normalizer_constant_row_zeroed():
    X = np.vstack([np.full(10, 3.0), np.arange(10.0)])
    out = TimeSeriesZNormalizer().fit_transform(X)
    np.testing.assert_array_equal(out[0], 0.0)


def test_classifier_learns_separable_problem(rng):
    X, y = separable_data(rng, count=60, length=32)
    clf = ConvNetTimeSeriesClassifier(epochs=15, batch_size=10, learning_rate=0.05, seed=1)
    clf.fit(X, y)
    X_new, y_new = separable_data(rng, count=20, length=32)
    assert (clf.predict(X_new) == y_new).mean() >= 0.9
    proba = clf.predict_proba(X_new)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-6)


def test_classifier_preserves_original_labels(rng):
    X, y = separable_data(rng, count=30, length=32)
    labels = np.where(y == 0, -1, 7)  # non-contiguous label values
    clf = ConvNetTimeSeriesClassifier(epochs=10, batch_size=10, learning_rate=0.05, seed=1)
    clf.fit(X, labels)
    assert set(clf.predict(X)) <= {-1, 7}
    np.testing.assert_array_equal(clf.classes_, [-1, 7])


def test_classifier_clone_and_params():
    clf = ConvNetTimeSeriesClassifier(epochs=3, seed=9)
    params = clf.get_params()
    assert params["epochs"] == 3 and params["seed"] == 9
    cloned = clone(clf)
    assert cloned.get_params() == params


def test_ordering_transform_is_row_permutation(rng):
    X = rng.normal(size=(12, 8))
    est = AgglomerativeOrdering(distance="euclidean", linkage="average").fit(X)
    out = est.transform(X)
    np.testing.assert_array_equal(out, X[est.ordering_])
    assert sorted(est.ordering_) == list(range(12))
    assert np.isfinite(est.score_)


def test_ordering_groups_separated_clusters(rng):
    # two tight clusters: the fitted order keeps each cluster contiguous
    a = rng.normal(size=(5, 6)) * 0.01
    b = rng.normal(size=(5, 6)) * 0.01 + 50.0
    X = np.vstack([a, b])[rng.permutation(10)]
    est = AgglomerativeOrdering().fit(X)
    sides = (X[est.ordering_][:, 0] > 25).astype(int)
    assert np.abs(np.diff(sides)).sum() == 1  # exactly one cluster boundary


def test_ordering_row_count_mismatch(rng):
    est = AgglomerativeOrdering().fit(rng.normal(size=(6, 4)))
    with pytest.raises(ValueError, match="rows"):
        est.transform(rng.normal(size=(5, 4)))


def test_pipeline_compatibility(rng):
    X, y = separable_data(rng, count=40, length=32)
    pipe = make_pipeline(
        TimeSeriesZNormalizer(),
        ConvNetTimeSeriesClassifier(epochs=10, batch_size=10, learning_rate=0.05, seed=2),
    )
    pipe.fit(X, y)
    assert pipe.predict(X).shape == (40,)
