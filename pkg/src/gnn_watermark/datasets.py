"""Citation-network loaders, the GRAPH1 interchange format and synthetic graphs."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .graph import AttributedGraph, build_graph
from .trigger import TriggerGraph, TriggerParams

log = logging.getLogger(__name__)

PathLike = Union[str, os.PathLike]

GRAPH_FORMAT = "GRAPH1"
DATA_ROOT_ENV = "GNNWM_DATA_ROOT"


class DatasetFormatError(ValueError):
    """Raised for malformed dataset files; carries the offending line number."""

    def __init__(self, message: str, path: Optional[PathLike] = None, line: Optional[int] = None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    num_nodes: int
    feature_dim: int
    num_classes: int
    # Raw link count as published; mutual citations collapse on load, so
    # the undirected edge count is only pinned to a range.
    min_edges: int
    max_edges: int

    def check(self, g: AttributedGraph) -> None:
        got = (g.num_nodes, g.feature_dim, g.num_classes)
        want = (self.num_nodes, self.feature_dim, self.num_classes)
        if got != want:
            raise DatasetFormatError(
                f"{self.name}: expected (nodes, features, classes) = {want}, got {got}"
            )
        if not self.min_edges <= g.num_edges <= self.max_edges:
            raise DatasetFormatError(
                f"{self.name}: {g.num_edges} undirected edges outside "
                f"[{self.min_edges}, {self.max_edges}]"
            )


CORA = DatasetSpec("cora", 2708, 1433, 7, min_edges=5278, max_edges=5429)
PUBMED = DatasetSpec("pubmed", 19717, 500, 3, min_edges=44000, max_edges=44338)


def _dedup_edges(pairs, id_to_index, path) -> Tuple[List[Tuple[int, int]], int, int]:
    edges, unknown, loops = [], 0, 0
    for a, b in pairs:
        ia, ib = id_to_index.get(a), id_to_index.get(b)
        if ia is None or ib is None:
            unknown += 1
        elif ia == ib:
            loops += 1
        else:
            edges.append((ia, ib))
    if unknown:
        log.warning("%s: dropped %d citations referencing unknown ids", path, unknown)
    if loops:
        log.warning("%s: dropped %d self-citations", path, loops)
    return edges, unknown, loops


def load_cora(
    content_path: PathLike,
    cites_path: PathLike,
    expected: Optional[DatasetSpec] = None,
) -> AttributedGraph:
    """Parse the published ``cora.content`` / ``cora.cites`` pair.

    Node indices follow first appearance in the content file; class strings
    map to 0..C-1 in lexicographic order.
    """
    ids: List[str] = []
    rows: List[np.ndarray] = []
    label_strings: List[str] = []
    with open(content_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) < 3:
                raise DatasetFormatError("expected id, features and label", content_path, lineno)
            n_feat = len(fields) - 2
            if n_feat != CORA.feature_dim:
                raise DatasetFormatError(
                    f"expected {CORA.feature_dim} features, found {n_feat}", content_path, lineno
                )
            try:
                rows.append(np.array(fields[1:-1], dtype=np.float64))
            except ValueError as exc:
                raise DatasetFormatError(f"bad feature value ({exc})", content_path, lineno) from None
            ids.append(fields[0])
            label_strings.append(fields[-1])

    id_to_index: Dict[str, int] = {}
    for i, pid in enumerate(ids):
        if pid in id_to_index:
            raise DatasetFormatError(f"duplicate paper id {pid!r}", content_path)
        id_to_index[pid] = i
    classes = sorted(set(label_strings))
    class_index = {c: i for i, c in enumerate(classes)}

    pairs = []
    with open(cites_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != 2:
                raise DatasetFormatError("expected 'cited citing'", cites_path, lineno)
            pairs.append((fields[0], fields[1]))
    edges, _, _ = _dedup_edges(pairs, id_to_index, cites_path)

    features = np.vstack(rows) if rows else np.zeros((0, CORA.feature_dim))
    g = build_graph(
        len(ids), edges, features,
        labels=[class_index[s] for s in label_strings],
        num_classes=max(len(classes), 2),
    )
    if expected is not None:
        expected.check(g)
    return g


PUBMED_NODE_FILE = "Pubmed-Diabetes.NODE.paper.tab"
PUBMED_CITES_FILE = "Pubmed-Diabetes.DIRECTED.cites.tab"


def load_pubmed(
    path: PathLike,
    cites_path: Optional[PathLike] = None,
    expected: Optional[DatasetSpec] = None,
) -> AttributedGraph:
    """Parse the published Pubmed-Diabetes tab files.

    ``path`` is the ``NODE.paper.tab`` file or the directory holding both
    files.  Features are dense TF/IDF rows in header declaration order and
    labels ``1, 2, 3`` become ``0, 1, 2``.
    """
    path = Path(path)
    node_path = path / PUBMED_NODE_FILE if path.is_dir() else path
    if cites_path is None:
        cites_path = node_path.parent / PUBMED_CITES_FILE

    with open(node_path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if len(lines) < 2 or not lines[0].startswith("NODE"):
        raise DatasetFormatError("missing NODE header", node_path, 1)
    vocab: Dict[str, int] = {}
    for decl in lines[1].split("\t"):
        parts = decl.split(":")
        if parts[0] == "numeric" and len(parts) >= 2:
            vocab[parts[1]] = len(vocab)

    ids: List[str] = []
    labels: List[int] = []
    features = []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        fields = line.split("\t")
        row = np.zeros(len(vocab))
        label = None
        for item in fields[1:]:
            name, sep, value = item.partition("=")
            if not sep:
                raise DatasetFormatError(f"expected name=value, got {item!r}", node_path, lineno)
            if name == "label":
                if value not in ("1", "2", "3"):
                    raise DatasetFormatError(f"unknown label {value!r}", node_path, lineno)
                label = int(value) - 1
            elif name == "summary":
                continue
            elif name in vocab:
                try:
                    row[vocab[name]] = float(value)
                except ValueError:
                    raise DatasetFormatError(f"bad value {value!r}", node_path, lineno) from None
            else:
                raise DatasetFormatError(f"undeclared feature {name!r}", node_path, lineno)
        if label is None:
            raise DatasetFormatError("node without label", node_path, lineno)
        ids.append(fields[0].strip())
        labels.append(label)
        features.append(row)
    if expected is not None and len(vocab) != expected.feature_dim:
        raise DatasetFormatError(
            f"expected {expected.feature_dim} features, header declares {len(vocab)}", node_path, 2
        )
    id_to_index = {pid: i for i, pid in enumerate(ids)}

    pairs = []
    with open(cites_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if lineno <= 2 or not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != 4 or fields[2].strip() != "|":
                raise DatasetFormatError("expected 'id\\tpaper:A\\t|\\tpaper:B'", cites_path, lineno)
            a = fields[1].strip().partition(":")[2]
            b = fields[3].strip().partition(":")[2]
            pairs.append((a, b))
    edges, _, _ = _dedup_edges(pairs, id_to_index, cites_path)

    x = np.vstack(features) if features else np.zeros((0, len(vocab)))
    g = build_graph(len(ids), edges, x, labels=labels, num_classes=3)
    if expected is not None:
        expected.check(g)
    return g


def load_dataset(name: str, root: Optional[PathLike] = None) -> AttributedGraph:
    """Load ``cora``/``pubmed`` from ``root`` (default: ``$GNNWM_DATA_ROOT``) or a GRAPH1 file.

    Expected layout: ``<root>/cora/cora.{content,cites}`` and
    ``<root>/pubmed/Pubmed-Diabetes.*.tab``.
    """
    if name.endswith(".json") or Path(name).is_file():
        return load_graph(name)
    root = root or os.environ.get(DATA_ROOT_ENV)
    if root is None:
        raise FileNotFoundError(f"dataset root not given and ${DATA_ROOT_ENV} is unset")
    root = Path(root)
    key = name.lower()
    if key == "cora":
        base = root / "cora" if (root / "cora").is_dir() else root
        return load_cora(base / "cora.content", base / "cora.cites", expected=CORA)
    if key == "pubmed":
        base = root / "pubmed" if (root / "pubmed").is_dir() else root
        return load_pubmed(base, expected=PUBMED)
    raise ValueError(f"unknown dataset {name!r}")


# ---------------------------------------------------------------------------
# GRAPH1


def graph_to_dict(g: AttributedGraph) -> dict:
    return {
        "format": GRAPH_FORMAT,
        "num_nodes": g.num_nodes,
        "num_classes": g.num_classes,
        "feature_dim": g.feature_dim,
        "edges": g.edge_list().tolist(),
        "features": g.features.tolist(),
        "labels": None if g.labels is None else g.labels.tolist(),
    }


def graph_from_dict(doc: dict) -> AttributedGraph:
    if doc.get("format") != GRAPH_FORMAT:
        raise DatasetFormatError(f"unsupported format {doc.get('format')!r}, want {GRAPH_FORMAT}")
    n = int(doc["num_nodes"])
    d = int(doc["feature_dim"])
    edges = np.asarray(doc["edges"], dtype=np.int64).reshape(-1, 2)
    if len(edges) and np.any(edges[:, 0] >= edges[:, 1]):
        i = int(np.flatnonzero(edges[:, 0] >= edges[:, 1])[0])
        raise DatasetFormatError(f"edge {edges[i].tolist()} is not in canonical a < b order")
    if len(np.unique(edges, axis=0)) != len(edges):
        raise DatasetFormatError("duplicate edge")
    features = np.asarray(doc["features"], dtype=np.float64).reshape(n, d)
    try:
        return build_graph(n, edges, features, labels=doc.get("labels"), num_classes=int(doc["num_classes"]))
    except ValueError as exc:
        raise DatasetFormatError(str(exc)) from None


def save_graph(path: PathLike, g: AttributedGraph) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(graph_to_dict(g), fh, separators=(",", ":"))


def load_graph(path: PathLike) -> AttributedGraph:
    with open(path, encoding="utf-8") as fh:
        return graph_from_dict(json.load(fh))


def watermark_sidecar_path(path: PathLike) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".watermark.json")


def save_trigger(path: PathLike, t: TriggerGraph) -> Path:
    """Write the trigger as GRAPH1 plus a ``.watermark.json`` sidecar; returns the sidecar path."""
    save_graph(path, t.graph)
    sidecar = watermark_sidecar_path(path)
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "watermark": t.watermark.tolist(),
                "n": t.params.n,
                "p_g": t.params.p_g,
                "p_r": t.params.p_r,
                "fingerprint": f"{t.params.fingerprint:016x}",
            },
            fh,
            separators=(",", ":"),
        )
    return sidecar


def load_trigger(path: PathLike) -> TriggerGraph:
    g = load_graph(path)
    with open(watermark_sidecar_path(path), encoding="utf-8") as fh:
        meta = json.load(fh)
    params = TriggerParams(int(meta["n"]), float(meta["p_g"]), float(meta["p_r"]), int(meta["fingerprint"], 16))
    watermark = np.asarray(meta["watermark"], dtype=np.int64)
    return TriggerGraph(g.with_labels(watermark), g.with_labels(watermark).labels, params)


# ---------------------------------------------------------------------------
# Synthetic


def make_synthetic(
    num_nodes: int,
    num_classes: int,
    d: int,
    homophily: float,
    seed: int,
    avg_degree: float = 4.0,
    signal: float = 0.9,
    noise: float = 0.1,
) -> AttributedGraph:
    """Planted-partition graph with class-indicator features.

    Nodes are split into contiguous, equal-sized classes.  Same-class pairs
    connect with probability ``homophily * base`` and cross-class pairs with
    ``(1 - homophily) * base``, where ``base`` targets ``avg_degree``.  The
    feature columns are cut into one block per class; a node's own block
    cells are 1 with probability ``signal``, all other cells with ``noise``.
    """
    if num_nodes < 1 or num_classes < 2 or d < num_classes:
        raise ValueError("need num_nodes >= 1, num_classes >= 2 and d >= num_classes")
    if not 0.0 <= homophily <= 1.0:
        raise ValueError("homophily must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    labels = (np.arange(num_nodes) * num_classes) // num_nodes
    size = num_nodes / num_classes
    denom = homophily * (size - 1) + (1.0 - homophily) * (num_nodes - size)
    base = avg_degree / denom if denom > 0 else 0.0
    p_in = min(1.0, homophily * base)
    p_out = min(1.0, (1.0 - homophily) * base)

    src, dst = [], []
    for i in range(num_nodes - 1):
        j = np.arange(i + 1, num_nodes)
        p = np.where(labels[j] == labels[i], p_in, p_out)
        hit = j[rng.random(len(j)) < p]
        src.append(np.full(len(hit), i))
        dst.append(hit)
    edges = np.stack([np.concatenate(src), np.concatenate(dst)], axis=1) if src else np.zeros((0, 2))

    block = (np.arange(d) * num_classes) // d
    own = block[None, :] == labels[:, None]
    prob = np.where(own, signal, noise)
    features = (rng.random((num_nodes, d)) < prob).astype(np.float64)
    return build_graph(num_nodes, edges, features, labels=labels, num_classes=num_classes)
