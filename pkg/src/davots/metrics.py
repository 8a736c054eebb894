"""Pairwise distances over equal-length vectors and condensed matrices.

Three distance kinds drive the clustering: plain Euclidean, a
max-normalized mean-square Euclidean variant for shape comparison, and a
Pearson-correlation distance (1 - r).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DISTANCE_KINDS = ("euclidean", "norm_euclidean", "pearson")

MAX_FLOOR = 1e-12


class MetricError(ValueError):
    pass


def _check_pair(x: np.ndarray, y: np.ndarray, min_len: int = 1) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise MetricError(f"length mismatch: {x.shape} vs {y.shape}")
    if x.size < min_len:
        raise MetricError(f"vectors shorter than {min_len}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise MetricError("non-finite input")
    return x, y


def euclidean(x, y) -> float:
    x, y = _check_pair(x, y)
    d = x - y
    return float(np.sqrt(np.dot(d, d)))


def _max_normalize(x: np.ndarray) -> np.ndarray:
    # absolute max: z-normalized series are signed, a signed max could be
    # near zero or negative
    m = np.max(np.abs(x))
    if m < MAX_FLOOR:
        return x
    return x / m


def norm_euclidean(x, y) -> float:
    """Max-normalize both vectors, then RMS difference averaged over the
    number of time points."""
    x, y = _check_pair(x, y)
    d = _max_normalize(x) - _max_normalize(y)
    return float(np.sqrt(np.dot(d, d) / x.size))


def pearson(x, y) -> float:
    """1 - sample Pearson correlation.  Both vectors constant -> 0, exactly
    one constant -> 1, keeping the function total for flat inputs."""
    x, y = _check_pair(x, y, min_len=2)
    if np.array_equal(x, y):
        return 0.0  # exact identity regardless of rounding in r
    xc = x - x.mean()
    yc = y - y.mean()
    sx = np.sqrt(np.dot(xc, xc))
    sy = np.sqrt(np.dot(yc, yc))
    x_const = sx < MAX_FLOOR
    y_const = sy < MAX_FLOOR
    if x_const and y_const:
        return 0.0
    if x_const or y_const:
        return 1.0
    r = float(np.dot(xc, yc) / (sx * sy))
    r = min(1.0, max(-1.0, r))
    return 1.0 - r


_PAIRWISE = {
    "euclidean": euclidean,
    "norm_euclidean": norm_euclidean,
    "pearson": pearson,
}


def distance(kind: str, x, y) -> float:
    try:
        fn = _PAIRWISE[kind]
    except KeyError:
        raise MetricError(f"unknown distance kind {kind!r}") from None
    return fn(x, y)


def condensed_index(m: int, i: int, j: int) -> int:
    """Position of pair (i, j), i < j, in condensed upper-triangular order."""
    if not 0 <= i < j < m:
        raise IndexError(f"bad pair ({i}, {j}) for m={m}")
    return m * i - i * (i + 1) // 2 + (j - i - 1)


@dataclass
class DistanceMatrix:
    """Symmetric distance matrix in condensed upper-triangular storage."""

    kind: str
    size: int
    values: np.ndarray  # shape (m*(m-1)//2,)

    def get(self, i: int, j: int) -> float:
        if i == j:
            return 0.0
        if i > j:
            i, j = j, i
        return float(self.values[condensed_index(self.size, i, j)])

    def full(self) -> np.ndarray:
        m = self.size
        out = np.zeros((m, m), dtype=np.float64)
        pos = 0
        for i in range(m - 1):
            row = self.values[pos : pos + m - 1 - i]
            out[i, i + 1 :] = row
            out[i + 1 :, i] = row
            pos += m - 1 - i
        return out

    def to_bytes(self) -> bytes:
        return np.asarray(self.values, dtype=np.float32).tobytes()


def _prepare_rows(rows, kind: str) -> np.ndarray:
    try:
        X = np.asarray(rows, dtype=np.float64)
    except ValueError as exc:
        raise MetricError(f"ragged input: {exc}") from None
    if X.ndim != 2:
        raise MetricError("rows must form a 2-D array of equal-length vectors")
    if not np.all(np.isfinite(X)):
        raise MetricError("non-finite input")
    if kind == "norm_euclidean":
        m = np.max(np.abs(X), axis=1, keepdims=True)
        scale = np.where(m < MAX_FLOOR, 1.0, m)
        return X / scale
    if kind == "pearson":
        return X  # handled pairwise to keep the constant-vector rules exact
    return X


def distance_matrix(rows, kind: str) -> DistanceMatrix:
    """Condensed pairwise distances.  Each pair is computed once in
    canonical (i < j) order, so the result is exactly symmetric and
    schedule-independent."""
    if kind not in _PAIRWISE:
        raise MetricError(f"unknown distance kind {kind!r}")
    X = _prepare_rows(rows, kind)
    m = X.shape[0]
    if m < 2:
        raise MetricError("need at least 2 rows")

    out = np.empty(m * (m - 1) // 2, dtype=np.float64)
    pos = 0
    if kind == "pearson":
        xc = X - X.mean(axis=1, keepdims=True)
        norms = np.sqrt(np.einsum("ij,ij->i", xc, xc))
        const = norms < MAX_FLOOR
        safe = np.where(const, 1.0, norms)
        unit = xc / safe[:, None]
        for i in range(m - 1):
            r = unit[i + 1 :] @ unit[i]
            d = 1.0 - np.clip(r, -1.0, 1.0)
            tail_const = const[i + 1 :]
            if const[i]:
                d = np.where(tail_const, 0.0, 1.0)
            else:
                d = np.where(tail_const, 1.0, d)
            # exact identity for exactly-equal rows
            d = np.where(np.all(X[i + 1 :] == X[i], axis=1), 0.0, d)
            out[pos : pos + m - 1 - i] = d
            pos += m - 1 - i
    else:
        # euclidean and norm_euclidean (rows already max-normalized above)
        scale = 1.0 / X.shape[1] if kind == "norm_euclidean" else 1.0
        for i in range(m - 1):
            diff = X[i + 1 :] - X[i]
            sq = np.einsum("ij,ij->i", diff, diff)
            out[pos : pos + m - 1 - i] = np.sqrt(sq * scale)
            pos += m - 1 - i
    return DistanceMatrix(kind=kind, size=m, values=out)
