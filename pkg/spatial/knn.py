"""Exact k-nearest-neighbour tables over Gaussian means."""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
from scipy.spatial.distance import cdist

from core.errors import ConfigurationError, NumericalError, ShapeError

LEAF_SIZE = 8


@dataclass(frozen=True, eq=False)
class NeighborTable:
    """``indices[i]`` lists the ``k`` nearest points to ``i``, closest first."""

    k: int
    indices: np.ndarray
    include_self: bool = False

    def __post_init__(self) -> None:
        indices = np.array(self.indices, dtype=np.int64)
        if indices.ndim != 2 or indices.shape[1] != self.k:
            raise ShapeError("NeighborTable", indices.shape, (-1, self.k))
        indices.setflags(write=False)
        object.__setattr__(self, "indices", indices)

    @property
    def count(self) -> int:
        return self.indices.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NeighborTable):
            return NotImplemented
        return self.k == other.k and np.array_equal(self.indices, other.indices)

    __hash__ = object.__hash__


@dataclass(slots=True)
class _Node:
    start: int
    stop: int
    axis: int = -1
    split: float = 0.0
    left: Optional["_Node"] = None
    right: Optional["_Node"] = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None


class KDTree:
    """Median-split kd-tree with leaf buckets."""

    def __init__(self, points: np.ndarray, leaf_size: int = LEAF_SIZE) -> None:
        self.points = np.ascontiguousarray(points, dtype=np.float64)
        self.leaf_size = max(1, leaf_size)
        self.index = np.arange(self.points.shape[0])
        self.root = self._build(0, self.points.shape[0])

    def _build(self, start: int, stop: int) -> _Node:
        node = _Node(start, stop)
        if stop - start <= self.leaf_size:
            return node
        chunk = self.points[self.index[start:stop]]
        axis = int(np.argmax(chunk.max(axis=0) - chunk.min(axis=0)))
        mid = (start + stop) // 2
        order = np.argpartition(chunk[:, axis], mid - start, kind="introselect")
        self.index[start:stop] = self.index[start:stop][order]
        node.axis = axis
        node.split = float(self.points[self.index[mid], axis])
        node.left = self._build(start, mid)
        node.right = self._build(mid, stop)
        return node

    def query(self, i: int, k: int, include_self: bool = False) -> np.ndarray:
        """The ``k`` nearest points to point ``i`` ordered by (distance, index)."""
        query = self.points[i : i + 1]
        heap: list[tuple[float, int]] = []  # (-d2, -index): heap[0] is the worst kept candidate

        def offer(d2: float, j: int) -> None:
            entry = (-d2, -j)
            if len(heap) < k:
                heapq.heappush(heap, entry)
            elif entry > heap[0]:
                heapq.heapreplace(heap, entry)

        def search(node: _Node) -> None:
            if node.is_leaf:
                members = self.index[node.start : node.stop]
                d2 = cdist(query, self.points[members], "sqeuclidean")[0]
                for dist, j in zip(d2, members):
                    if include_self or j != i:
                        offer(float(dist), int(j))
                return
            diff = float(query[0, node.axis]) - node.split
            near, far = (node.left, node.right) if diff <= 0 else (node.right, node.left)
            search(near)
            if len(heap) < k or diff * diff <= -heap[0][0]:
                search(far)

        search(self.root)
        ranked = sorted((-d, -j) for d, j in heap)
        return np.array([j for _, j in ranked], dtype=np.int64)


def brute_force_knn(points: np.ndarray, k: int, include_self: bool = False) -> np.ndarray:
    """O(G^2) reference answer with the same tie-breaking as the tree."""
    points = np.asarray(points, dtype=np.float64)
    G = points.shape[0]
    d2 = cdist(points, points, "sqeuclidean")
    if not include_self:
        np.fill_diagonal(d2, np.inf)
    order = np.arange(G)
    rows = [np.lexsort((order, d2[i]))[:k] for i in range(G)]
    return np.array(rows, dtype=np.int64).reshape(G, k)


def build_knn(
    points: np.ndarray,
    k: int,
    include_self: bool = False,
    method: Literal["tree", "brute"] = "tree",
) -> NeighborTable:
    """Exact Euclidean kNN; rows are padded with the nearest neighbour when G is too small."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3:
        raise ShapeError("build_knn", points.shape, (-1, 3))
    if points.shape[0] < 1 or k < 1:
        raise ConfigurationError("build_knn needs at least one point and k >= 1.")
    if not np.isfinite(points).all():
        bad = int(np.flatnonzero(~np.isfinite(points).all(axis=1))[0])
        raise NumericalError("Non-finite point coordinates", gaussian_index=bad)

    G = points.shape[0]
    available = G if include_self else G - 1
    kk = min(k, available)
    if kk == 0:
        return NeighborTable(k, np.zeros((G, k), dtype=np.int64), include_self)
    if method == "brute":
        found = brute_force_knn(points, kk, include_self)
    elif method == "tree":
        tree = KDTree(points)
        found = np.stack([tree.query(i, kk, include_self) for i in range(G)])
    else:
        raise ConfigurationError(f"Unknown kNN method {method!r}.")
    if kk < k:
        padding = np.repeat(found[:, :1], k - kk, axis=1)
        found = np.concatenate([found, padding], axis=1)
    return NeighborTable(k, found, include_self)


__all__ = ["KDTree", "NeighborTable", "brute_force_knn", "build_knn"]
