"""scikit-learn compatible wrappers around the compute core.

These let the normalizer, the CNN classifier and the clustering-based
row ordering drop into sklearn pipelines and model-selection tooling.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import hclust, metrics
from .ingest import Dataset, Sample
from .model import TrainConfig, build_default_model, forward_batch, train


class TimeSeriesZNormalizer(TransformerMixin, BaseEstimator):
    """Per-row z-normalization with population stddev; near-constant rows
    map to zeros."""

    def __init__(self, std_floor: float = 1e-12):
        self.std_floor = std_floor

    def fit(self, X, y=None):
        check_array(X)
        return self

    def transform(self, X):
        X = check_array(X, dtype=np.float64)
        mu = X.mean(axis=1, keepdims=True)
        sigma = X.std(axis=1, keepdims=True)
        out = np.where(sigma < self.std_floor, 0.0, (X - mu) / np.where(sigma == 0, 1.0, sigma))
        return out


class ConvNetTimeSeriesClassifier(ClassifierMixin, BaseEstimator):
    """The default two-conv-layer CNN behind a fit/predict interface."""

    def __init__(self, epochs: int = 20, batch_size: int = 32, learning_rate: float = 0.01, seed: int = 0):
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.seed = seed

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_, encoded = np.unique(y, return_inverse=True)
        samples = [
            Sample(index=i, values=X[i], label=int(encoded[i])) for i in range(X.shape[0])
        ]
        ds = Dataset(
            id="fit",
            series_length=X.shape[1],
            class_count=len(self.classes_),
            stages={"train": samples},
        )
        model = build_default_model(X.shape[1], len(self.classes_), self.seed)
        cfg = TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            seed=self.seed,
        )
        self.model_, self.training_log_ = train(model, ds, cfg)
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        return forward_batch(self.model_, X).probabilities

    def predict(self, X):
        return self.classes_[self.predict_proba(X).argmax(axis=1)]


class AgglomerativeOrdering(TransformerMixin, BaseEstimator):
    """Seriation transformer: fit learns a leaf-order permutation from
    hierarchical clustering, transform reorders rows by it."""

    def __init__(self, distance: str = "euclidean", linkage: str = "ward"):
        self.distance = distance
        self.linkage = linkage

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        dm = metrics.distance_matrix(X, self.distance)
        self.dendrogram_ = hclust.agglomerate(dm, self.linkage)
        ordering = hclust.leaf_order(self.dendrogram_)
        self.ordering_ = np.asarray(ordering.permutation, dtype=np.int64)
        self.score_ = hclust.ordering_score(ordering, X, self.distance).mean_neighbor_distance
        return self

    def transform(self, X):
        check_is_fitted(self, "ordering_")
        X = check_array(X, dtype=np.float64)
        if X.shape[0] != self.ordering_.size:
            raise ValueError(f"{X.shape[0]} rows but ordering fitted on {self.ordering_.size}")
        return X[self.ordering_]
