"""Erdos-Renyi trigger graphs carrying a C-ary watermark."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, Tuple, Union

import numpy as np

from .graph import AttributedGraph, build_graph
from .keyed_rand import RandomStream, key_fingerprint, sample_distinct


@dataclass(frozen=True)
class TriggerParams:
    n: int
    p_g: float
    p_r: float
    fingerprint: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("trigger needs at least one node")
        if not 0.0 <= self.p_g <= 1.0:
            raise ValueError(f"p_g must lie in [0, 1], got {self.p_g}")
        if not 0.0 <= self.p_r <= 1.0:
            raise ValueError(f"p_r must lie in [0, 1], got {self.p_r}")


@dataclass(frozen=True, eq=False)
class TriggerGraph:
    graph: AttributedGraph
    watermark: np.ndarray
    params: TriggerParams

    @property
    def n(self) -> int:
        return self.graph.num_nodes

    def equals(self, other: "TriggerGraph") -> bool:
        return (
            self.params == other.params
            and np.array_equal(self.watermark, other.watermark)
            and self.graph.equals(other.graph)
        )


def generate_er_edges(n: int, p_g: float, stream: RandomStream) -> List[Tuple[int, int]]:
    """G(n, p) edges: pair ``(i, j)``, ``i < j`` in lexicographic order, is kept iff u < p_g.

    One draw is consumed per candidate pair, so the stream position after
    the call depends only on ``n``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= p_g <= 1.0:
        raise ValueError(f"p_g must lie in [0, 1], got {p_g}")
    iu, ju = np.triu_indices(n, k=1)
    keep = stream.floats(len(iu)) < p_g
    return list(zip(iu[keep].tolist(), ju[keep].tolist()))


def generate_features(n: int, d: int, p_r: float, stream: RandomStream) -> np.ndarray:
    """Binary ``n x d`` matrix with exactly ``round(p_r * n * d)`` ones."""
    if n * d < 1:
        raise ValueError("feature matrix must have at least one cell")
    if not 0.0 <= p_r <= 1.0:
        raise ValueError(f"p_r must lie in [0, 1], got {p_r}")
    cells = n * d
    k = int(np.floor(p_r * cells + 0.5))
    flat = np.zeros(cells, dtype=np.float64)
    flat[sample_distinct(stream, cells, k)] = 1.0
    return flat.reshape(n, d)


def generate_watermark(n: int, c: int, stream: RandomStream) -> np.ndarray:
    if c < 2:
        raise ValueError(f"watermark alphabet needs C >= 2, got {c}")
    return np.floor(stream.floats(n) * c).astype(np.int64)


def make_trigger(
    key: Union[bytes, str], n: int, p_g: float, p_r: float, d: int, c: int
) -> TriggerGraph:
    """Regenerate the trigger graph owned by ``key``.

    ``d`` and ``c`` are the host dataset's feature dimension and class
    count.  Structure, features and labels each use their own keyed stream.
    """
    params = TriggerParams(n, float(p_g), float(p_r), key_fingerprint(key))
    edges = generate_er_edges(n, p_g, RandomStream.from_key(key, "edges"))
    features = generate_features(n, d, p_r, RandomStream.from_key(key, "features"))
    watermark = generate_watermark(n, c, RandomStream.from_key(key, "labels"))
    graph = build_graph(n, edges, features, labels=watermark, num_classes=c)
    return TriggerGraph(graph=graph, watermark=graph.labels, params=params)


def flip_features(t: TriggerGraph) -> TriggerGraph:
    """Complement every binary feature cell; structure and labels are kept."""
    x = t.graph.features
    if not np.all((x == 0.0) | (x == 1.0)):
        raise ValueError("flip_features requires binary features")
    graph = t.graph.with_features(1.0 - x)
    # Rounded so flipping twice restores the original proportion exactly.
    p_r = round(1.0 - t.params.p_r, 12)
    return TriggerGraph(graph, t.watermark, replace(t.params, p_r=p_r))
