"""Agglomerative clustering, dendrogram leaf ordering and ordering quality.

The agglomerator uses Lance-Williams updates over a condensed distance
matrix.  Ward operates on squared input distances and reports heights as
the square root, which also makes it applicable (as "Ward-like") to
non-Euclidean inputs such as the Pearson distance.

Tie-breaking is deterministic: every active cluster is keyed by the
smallest leaf index it contains, and among pairs at minimal distance the
lexicographically smallest (min key, max key) pair merges first.  Merge
records store the cluster with the smaller key on the left.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import DistanceMatrix, distance

LINKAGES = ("ward", "complete", "average", "single")


class ClusterError(ValueError):
    pass


@dataclass(frozen=True)
class Merge:
    left: int  # node id, cluster with the smaller leaf-index key
    right: int
    height: float
    size: int  # leaves in the merged cluster


@dataclass
class Dendrogram:
    """m-1 merges over nodes 0..2m-2; leaves are 0..m-1."""

    leaf_count: int
    merges: list[Merge]

    def validate(self) -> None:
        m = self.leaf_count
        if len(self.merges) != m - 1:
            raise ClusterError(f"expected {m - 1} merges, got {len(self.merges)}")
        seen = set()
        for t, mg in enumerate(self.merges):
            for node in (mg.left, mg.right):
                if not 0 <= node < m + t:
                    raise ClusterError(f"merge {t}: node {node} out of range")
                if node in seen:
                    raise ClusterError(f"merge {t}: node {node} merged twice")
                seen.add(node)
        if self.merges and self.merges[-1].size != m:
            raise ClusterError("final merge does not contain all leaves")


@dataclass
class Ordering:
    permutation: list[int]
    source: dict


@dataclass
class OrderingScore:
    mean_neighbor_distance: float
    kind: str


def agglomerate(dm: DistanceMatrix, linkage: str) -> Dendrogram:
    if linkage not in LINKAGES:
        raise ClusterError(f"unknown linkage {linkage!r}")
    m = dm.size
    if m < 2:
        raise ClusterError("need at least 2 points")
    if not np.all(np.isfinite(dm.values)):
        raise ClusterError("non-finite distance")

    ward = linkage == "ward"
    D = dm.full()
    if ward:
        D = D * D
    np.fill_diagonal(D, np.inf)

    # slot i holds the cluster whose smallest leaf is i; the merge of
    # slots i < j stays in slot i, so slots keep their keys
    node = np.arange(m, dtype=np.int64)
    sizes = np.ones(m, dtype=np.int64)
    active = np.ones(m, dtype=bool)
    merges: list[Merge] = []

    for t in range(m - 1):
        # rows/cols of retired slots are inf, so a plain row-major argmin
        # realizes the tie-break
        i, j = np.unravel_index(np.argmin(D), D.shape)
        i, j = int(min(i, j)), int(max(i, j))
        dij = D[i, j]
        height = float(np.sqrt(dij)) if ward else float(dij)
        ni, nj = int(sizes[i]), int(sizes[j])
        merges.append(Merge(left=int(node[i]), right=int(node[j]), height=height, size=ni + nj))

        active[j] = False
        others = np.flatnonzero(active)
        others = others[others != i]
        di = D[i, others]
        dj = D[j, others]
        D[j, :] = np.inf
        D[:, j] = np.inf
        if linkage == "single":
            new = np.minimum(di, dj)
        elif linkage == "complete":
            new = np.maximum(di, dj)
        elif linkage == "average":
            new = (ni * di + nj * dj) / (ni + nj)
        else:  # ward, on squared distances
            nk = sizes[others]
            new = ((ni + nk) * di + (nj + nk) * dj - nk * dij) / (ni + nj + nk)
        D[i, others] = new
        D[others, i] = new
        node[i] = m + t
        sizes[i] = ni + nj

    dg = Dendrogram(leaf_count=m, merges=merges)
    dg.validate()
    return dg


def leaf_order(dg: Dendrogram) -> Ordering:
    """In-order traversal of the merge tree, visiting the earlier-created
    child first.  Leaf k counts as created at time -k; the t-th merge
    creates its node at time t+1."""
    dg.validate()
    m = dg.leaf_count
    if m == 1:
        return Ordering(permutation=[0], source={})

    created = {k: -k for k in range(m)}
    children: dict[int, tuple[int, int]] = {}
    for t, mg in enumerate(dg.merges):
        nid = m + t
        created[nid] = t + 1
        children[nid] = (mg.left, mg.right)

    perm: list[int] = []
    stack = [m + len(dg.merges) - 1]
    while stack:
        nd = stack.pop()
        if nd < m:
            perm.append(nd)
            continue
        a, b = children[nd]
        first, second = (a, b) if created[a] <= created[b] else (b, a)
        stack.append(second)
        stack.append(first)
    return Ordering(permutation=perm, source={})


def ordering_score(ordering: Ordering, rows, kind: str) -> OrderingScore:
    """Mean distance between consecutive rows of the ordering; lower means
    neighbors are more similar."""
    X = np.asarray(rows, dtype=np.float64)
    perm = ordering.permutation
    if X.shape[0] != len(perm):
        raise ClusterError(f"{X.shape[0]} rows vs permutation of {len(perm)}")
    if len(perm) < 2:
        raise ClusterError("need at least 2 rows")
    total = 0.0
    for a, b in zip(perm, perm[1:]):
        total += distance(kind, X[a], X[b])
    return OrderingScore(mean_neighbor_distance=total / (len(perm) - 1), kind=kind)


def best_linkage(dm: DistanceMatrix, rows, kind: str) -> tuple[str, dict[str, float]]:
    """Run all linkages, score each leaf order, return the argmin.

    Ties resolve in the fixed order ward > complete > average > single.
    """
    scores: dict[str, float] = {}
    for linkage in LINKAGES:
        ordering = leaf_order(agglomerate(dm, linkage))
        scores[linkage] = ordering_score(ordering, rows, kind).mean_neighbor_distance
    best = min(LINKAGES, key=lambda lk: (scores[lk], LINKAGES.index(lk)))
    return best, scores
