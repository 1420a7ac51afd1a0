"""Undirected attributed graphs in compressed sparse row form."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .keyed_rand import RandomStream, sample_distinct


@dataclass(frozen=True, eq=False)
class AttributedGraph:
    """Immutable undirected graph with dense node features and optional labels.

    Every undirected edge is stored in both CSR directions, so
    ``col_indices[row_offsets[v]:row_offsets[v + 1]]`` is the sorted
    neighborhood of ``v``.
    """

    num_nodes: int
    num_edges: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    features: np.ndarray
    num_classes: int
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        for arr in (self.row_offsets, self.col_indices, self.features, self.labels):
            if arr is not None:
                arr.flags.writeable = False

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    def degree(self, v: int) -> int:
        self._check_node(v)
        return int(self.row_offsets[v + 1] - self.row_offsets[v])

    def neighbors(self, v: int) -> np.ndarray:
        self._check_node(v)
        return self.col_indices[self.row_offsets[v]:self.row_offsets[v + 1]]

    def edge_list(self) -> np.ndarray:
        """Canonical ``(a, b)`` pairs with ``a < b``, lexicographically sorted."""
        rows = np.repeat(np.arange(self.num_nodes), self.degrees)
        keep = rows < self.col_indices
        return np.stack([rows[keep], self.col_indices[keep]], axis=1)

    def adjacency(self) -> sp.csr_matrix:
        data = np.ones(len(self.col_indices), dtype=np.float64)
        return sp.csr_matrix(
            (data, self.col_indices, self.row_offsets),
            shape=(self.num_nodes, self.num_nodes),
        )

    def with_features(self, features: np.ndarray) -> "AttributedGraph":
        features = np.ascontiguousarray(features, dtype=np.float64)
        if features.shape[0] != self.num_nodes:
            raise ValueError("feature rows must equal num_nodes")
        return AttributedGraph(
            self.num_nodes, self.num_edges, self.row_offsets, self.col_indices,
            features, self.num_classes, self.labels,
        )

    def with_labels(self, labels: Optional[np.ndarray]) -> "AttributedGraph":
        return AttributedGraph(
            self.num_nodes, self.num_edges, self.row_offsets, self.col_indices,
            self.features, self.num_classes, _check_labels(labels, self.num_nodes, self.num_classes),
        )

    def equals(self, other: "AttributedGraph") -> bool:
        if (self.num_nodes, self.num_edges, self.num_classes) != (
            other.num_nodes, other.num_edges, other.num_classes
        ):
            return False
        if (self.labels is None) != (other.labels is None):
            return False
        same_labels = self.labels is None or np.array_equal(self.labels, other.labels)
        return (
            same_labels
            and np.array_equal(self.row_offsets, other.row_offsets)
            and np.array_equal(self.col_indices, other.col_indices)
            and self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features)
        )

    def _check_node(self, v: int) -> None:
        if not 0 <= v < self.num_nodes:
            raise IndexError(f"node {v} out of range [0, {self.num_nodes})")


def _check_labels(labels, num_nodes: int, num_classes: int) -> Optional[np.ndarray]:
    if labels is None:
        return None
    labels = np.asarray(labels, dtype=np.int64).copy()
    if labels.shape != (num_nodes,):
        raise ValueError(f"labels must have shape ({num_nodes},), got {labels.shape}")
    if num_nodes and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError(f"labels must lie in [0, {num_classes})")
    return labels


def build_graph(
    num_nodes: int,
    edges: Iterable[Tuple[int, int]],
    features,
    labels=None,
    num_classes: int = 2,
) -> AttributedGraph:
    """Build an :class:`AttributedGraph` from unordered node pairs.

    Duplicate pairs, in either orientation, collapse to one edge.
    """
    if num_nodes < 0:
        raise ValueError("num_nodes must be non-negative")
    features = np.array(features, dtype=np.float64)
    if features.ndim == 1 and num_nodes == 0:
        features = features.reshape(0, 0)
    if features.ndim != 2 or features.shape[0] != num_nodes:
        raise ValueError(
            f"features must have {num_nodes} rows, got shape {features.shape}"
        )
    pairs = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
    pairs = pairs.reshape(-1, 2)
    if pairs.size:
        if pairs.min() < 0 or pairs.max() >= num_nodes:
            raise ValueError(f"edge endpoint out of range [0, {num_nodes})")
        if np.any(pairs[:, 0] == pairs[:, 1]):
            bad = pairs[pairs[:, 0] == pairs[:, 1]][0]
            raise ValueError(f"self-loop ({bad[0]}, {bad[1]}) is not allowed")
    canon = np.sort(pairs, axis=1)
    canon = np.unique(canon, axis=0) if len(canon) else canon
    num_edges = len(canon)

    src = np.concatenate([canon[:, 0], canon[:, 1]])
    dst = np.concatenate([canon[:, 1], canon[:, 0]])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    counts = np.bincount(src, minlength=num_nodes)
    row_offsets = np.zeros(num_nodes + 1, dtype=np.int64)
    np.cumsum(counts, out=row_offsets[1:])

    return AttributedGraph(
        num_nodes=int(num_nodes),
        num_edges=int(num_edges),
        row_offsets=row_offsets,
        col_indices=dst.astype(np.int64),
        features=features,
        num_classes=int(num_classes),
        labels=_check_labels(labels, num_nodes, num_classes),
    )


def check_invariants(g: AttributedGraph) -> None:
    """Raise ``ValueError`` if ``g`` violates any structural invariant."""
    n = g.num_nodes
    if g.row_offsets.shape != (n + 1,) or g.row_offsets[0] != 0:
        raise ValueError("row_offsets malformed")
    if np.any(np.diff(g.row_offsets) < 0) or g.row_offsets[-1] != len(g.col_indices):
        raise ValueError("row_offsets not monotone or inconsistent with col_indices")
    if len(g.col_indices) != 2 * g.num_edges:
        raise ValueError("degree sum must equal 2 * num_edges")
    rows = np.repeat(np.arange(n), g.degrees)
    if len(rows) and (g.col_indices.min() < 0 or g.col_indices.max() >= n):
        raise ValueError("column index out of range")
    if np.any(rows == g.col_indices):
        raise ValueError("self-loop present")
    same_row = rows[1:] == rows[:-1]
    if np.any(g.col_indices[1:][same_row] <= g.col_indices[:-1][same_row]):
        raise ValueError("columns not strictly increasing within a row")
    fwd = set(zip(rows.tolist(), g.col_indices.tolist()))
    if any((b, a) not in fwd for a, b in fwd):
        raise ValueError("adjacency is not symmetric")
    if g.features.shape[0] != n:
        raise ValueError("feature rows must equal num_nodes")
    _check_labels(g.labels, n, g.num_classes)


@dataclass(frozen=True)
class SplitMasks:
    train_ids: np.ndarray
    val_ids: np.ndarray
    test_ids: np.ndarray


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def split_nodes(
    g_or_n, ratios: Sequence[float] = (0.4, 0.2, 0.4), seed: int = 0
) -> SplitMasks:
    """Seeded train/val/test partition of the nodes.

    Sizes are ``round(r_train * N)`` and ``round(r_val * N)`` (half rounds
    up); the test set takes the remainder.  Each id set is returned sorted.
    """
    n = g_or_n.num_nodes if isinstance(g_or_n, AttributedGraph) else int(g_or_n)
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three non-negative numbers summing to 1, got {ratios}")
    n_train = _round_half_up(ratios[0] * n)
    n_val = min(_round_half_up(ratios[1] * n), n - n_train)
    perm = np.asarray(sample_distinct(RandomStream(seed), n, n), dtype=np.int64)
    return SplitMasks(
        train_ids=np.sort(perm[:n_train]),
        val_ids=np.sort(perm[n_train:n_train + n_val]),
        test_ids=np.sort(perm[n_train + n_val:]),
    )
