"""GraphSAGE-mean node classifier with hand-written backpropagation and Adam.

Two mean-aggregation layers (width ``H``) feed a linear softmax head::

    a1 = mean({x_v} U {x_u : u in S1(v)})      h1 = relu(a1 @ w1 + b1)
    a2 = mean({h1_v} U {h1_u : u in S2(v)})    h2 = relu(a2 @ w2 + b2)
    p  = softmax(h2 @ w_out + b_out)

``S(v)`` is either the full neighborhood (inference) or ``k`` neighbors
drawn with replacement (training).  Each aggregation is a row-stochastic
sparse matrix, which makes the backward pass a chain of transposed
products.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .graph import AttributedGraph, SplitMasks
from .keyed_rand import RandomStream, derive_seed, sample_distinct, seed_bytes

PARAM_NAMES = ("w1", "b1", "w2", "b2", "w_out", "b_out")
WEIGHT_NAMES = ("w1", "w2", "w_out")

PROB_FLOOR = 1e-12


@dataclass(eq=False)
class SageModel:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w_out: np.ndarray
    b_out: np.ndarray
    # Bumped on every in-place update; forward caches remember it.
    version: int = field(default=0, compare=False)

    def __post_init__(self):
        d, h = self.w1.shape
        c = self.w_out.shape[1]
        expected = {
            "w1": (d, h), "b1": (h,), "w2": (h, h), "b2": (h,),
            "w_out": (h, c), "b_out": (c,),
        }
        for name, shape in expected.items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")

    @property
    def dims(self) -> Tuple[int, int, int]:
        return self.w1.shape[0], self.w1.shape[1], self.w_out.shape[1]

    def params(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self) -> "SageModel":
        return SageModel(**{k: v.copy() for k, v in self.params().items()})

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self.params().values())

    def equals(self, other: "SageModel") -> bool:
        return all(
            np.array_equal(a, b) for a, b in zip(self.params().values(), other.params().values())
        )

    @classmethod
    def zeros(cls, d: int, h: int, c: int) -> "SageModel":
        return cls(
            np.zeros((d, h)), np.zeros(h), np.zeros((h, h)), np.zeros(h),
            np.zeros((h, c)), np.zeros(c),
        )

    @classmethod
    def initialize(cls, d: int, c: int, h: int = 128, seed: int = 0) -> "SageModel":
        """Glorot-uniform weights drawn from a keyed stream, zero biases."""
        stream = RandomStream(derive_seed(seed_bytes(seed), "init"))

        def glorot(fan_in, fan_out):
            bound = math.sqrt(6.0 / (fan_in + fan_out))
            u = stream.floats(fan_in * fan_out).reshape(fan_in, fan_out)
            return (2.0 * u - 1.0) * bound

        return cls(glorot(d, h), np.zeros(h), glorot(h, h), np.zeros(h), glorot(h, c), np.zeros(c))


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 128
    sample_size: int = 5
    epochs: int = 200
    early_stop_patience: int = 20
    seed: int = 0
    trigger_weight: float = 1.0
    hidden_dim: int = 128

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.sample_size < 1:
            raise ValueError("batch_size and sample_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# Aggregation


def mean_aggregate(self_h, neighbor_hs) -> np.ndarray:
    """Element-wise mean of a node's own vector together with its neighbors'."""
    self_h = np.asarray(self_h, dtype=np.float64)
    if len(neighbor_hs) == 0:
        return self_h.copy()
    stacked = np.asarray(neighbor_hs, dtype=np.float64)
    if stacked.ndim != 2 or stacked.shape[1] != self_h.shape[0]:
        raise ValueError("all vectors must have the same length")
    return (self_h + stacked.sum(axis=0)) / (1 + len(stacked))


def sample_neighbors(g: AttributedGraph, v: int, k: int, stream: RandomStream) -> List[int]:
    """``k`` neighbors of ``v`` drawn uniformly with replacement; empty if isolated."""
    nbrs = g.neighbors(v)
    if len(nbrs) == 0:
        return []
    idx = (stream.floats(k) * len(nbrs)).astype(np.int64)
    return nbrs[idx].tolist()


def _gather_full(g: AttributedGraph, targets: np.ndarray):
    """Every neighbor of every target, flattened, with the owning target position."""
    deg = g.degrees[targets]
    owner = np.repeat(np.arange(len(targets)), deg)
    starts = np.repeat(g.row_offsets[targets], deg)
    within = np.arange(deg.sum()) - np.repeat(np.cumsum(deg) - deg, deg)
    return owner, g.col_indices[starts + within], deg


def _gather_sampled(g: AttributedGraph, targets: np.ndarray, k: int, stream: RandomStream):
    """Draws ``k`` neighbors per non-isolated target, in target order."""
    deg = g.degrees[targets]
    active = np.flatnonzero(deg > 0)
    u = stream.floats(k * len(active)).reshape(len(active), k)
    pick = (u * deg[active, None]).astype(np.int64)
    nbrs = g.col_indices[g.row_offsets[targets[active]][:, None] + pick].ravel()
    owner = np.repeat(active, k)
    counts = np.zeros(len(targets), dtype=np.int64)
    counts[active] = k
    return owner, nbrs, counts


def _aggregation(g, targets, mode, k, stream):
    """Row-stochastic matrix mapping source-node rows to target rows."""
    if mode == "full":
        owner, nbrs, counts = _gather_full(g, targets)
    else:
        owner, nbrs, counts = _gather_sampled(g, targets, k, stream)
    rows = np.concatenate([np.arange(len(targets)), owner])
    nodes = np.concatenate([targets, nbrs])
    sources = np.unique(nodes)
    cols = np.searchsorted(sources, nodes)
    weights = 1.0 / (1.0 + counts[rows])
    mat = sp.csr_matrix((weights, (rows, cols)), shape=(len(targets), len(sources)))
    mat.sum_duplicates()
    return mat, sources


# ---------------------------------------------------------------------------
# Forward / backward


@dataclass
class ForwardCache:
    batch: np.ndarray
    version: int
    m1: sp.csr_matrix
    a1: np.ndarray
    z1: np.ndarray
    m2: sp.csr_matrix
    a2: np.ndarray
    z2: np.ndarray
    h2: np.ndarray
    probs: np.ndarray


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def forward(
    m: SageModel,
    g: AttributedGraph,
    batch,
    mode: str = "full",
    k: int = 5,
    stream: Optional[RandomStream] = None,
) -> Tuple[np.ndarray, ForwardCache]:
    """Class probabilities for ``batch`` nodes of ``g``.

    ``mode="sampled"`` draws neighbors from ``stream``: first for the batch
    nodes in batch order (second layer), then for every distinct node that
    feeds them in ascending id order (first layer).
    """
    if g.feature_dim != m.dims[0]:
        raise ValueError(
            f"graph feature dim {g.feature_dim} does not match model input dim {m.dims[0]}"
        )
    if mode not in ("full", "sampled"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "sampled" and stream is None:
        raise ValueError("sampled mode needs a RandomStream")
    batch = np.asarray(batch, dtype=np.int64)

    m2, layer1 = _aggregation(g, batch, mode, k, stream)
    m1, layer0 = _aggregation(g, layer1, mode, k, stream)

    a1 = m1 @ g.features[layer0]
    z1 = a1 @ m.w1 + m.b1
    h1 = np.maximum(z1, 0.0)
    a2 = m2 @ h1
    z2 = a2 @ m.w2 + m.b2
    h2 = np.maximum(z2, 0.0)
    probs = _softmax(h2 @ m.w_out + m.b_out)
    return probs, ForwardCache(batch, m.version, m1, a1, z1, m2, a2, z2, h2, probs)


def cross_entropy(probs: np.ndarray, labels) -> float:
    labels = np.asarray(labels, dtype=np.int64)
    picked = probs[np.arange(len(labels)), labels]
    return float(-np.mean(np.log(np.maximum(picked, PROB_FLOOR))))


def backward(
    m: SageModel, cache: ForwardCache, labels, weight: float = 1.0
) -> Dict[str, np.ndarray]:
    """Exact gradients of ``weight * cross_entropy`` for the cached forward pass."""
    labels = np.asarray(labels, dtype=np.int64)
    if cache.version != m.version or cache.a1.shape[1] != m.dims[0]:
        raise ValueError("forward cache does not belong to this model state")
    if labels.shape != cache.batch.shape:
        raise ValueError("labels do not match the cached batch")
    b = len(labels)
    rows = np.arange(b)

    dlogits = cache.probs.copy()
    dlogits[rows, labels] -= 1.0
    # Clamped rows have a constant loss, hence no gradient.
    dlogits[cache.probs[rows, labels] < PROB_FLOOR] = 0.0
    dlogits *= weight / b

    grads = {
        "w_out": cache.h2.T @ dlogits,
        "b_out": dlogits.sum(axis=0),
    }
    dz2 = (dlogits @ m.w_out.T) * (cache.z2 > 0)
    grads["w2"] = cache.a2.T @ dz2
    grads["b2"] = dz2.sum(axis=0)
    dh1 = cache.m2.T @ (dz2 @ m.w2.T)
    dz1 = dh1 * (cache.z1 > 0)
    grads["w1"] = cache.a1.T @ dz1
    grads["b1"] = dz1.sum(axis=0)
    return {name: grads[name] for name in PARAM_NAMES}


def predict_labels(m: SageModel, g: AttributedGraph, batch=None) -> np.ndarray:
    """Full-neighborhood argmax; ties go to the smallest class index."""
    if batch is None:
        batch = np.arange(g.num_nodes)
    probs, _ = forward(m, g, batch, mode="full")
    return np.argmax(probs, axis=1)


def accuracy(m: SageModel, g: AttributedGraph, ids) -> float:
    ids = np.asarray(ids, dtype=np.int64)
    if len(ids) == 0:
        return float("nan")
    return float(np.mean(predict_labels(m, g, ids) == g.labels[ids]))


# ---------------------------------------------------------------------------
# Optimizer


@dataclass
class AdamState:
    m: Dict[str, np.ndarray]
    v: Dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: Dict[str, np.ndarray]) -> "AdamState":
        return cls(
            {k: np.zeros_like(p) for k, p in params.items()},
            {k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_step(
    params: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    state: AdamState,
    cfg: TrainConfig,
) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """Bias-corrected Adam update, applied to ``params`` in place."""
    state.t += 1
    bc1 = 1.0 - cfg.beta1 ** state.t
    bc2 = 1.0 - cfg.beta2 ** state.t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient for {name} has shape {g.shape}, expected {p.shape}")
        mt, vt = state.m[name], state.v[name]
        mt *= cfg.beta1
        mt += (1.0 - cfg.beta1) * g
        vt *= cfg.beta2
        vt += (1.0 - cfg.beta2) * (g * g)
        p -= cfg.learning_rate * (mt / bc1) / (np.sqrt(vt / bc2) + cfg.epsilon)
    return params, state


def _apply(m: SageModel, grads, state: AdamState, cfg: TrainConfig) -> None:
    adam_step(m.params(), grads, state, cfg)
    m.version += 1


# ---------------------------------------------------------------------------
# Training


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_accuracy: float
    trigger_loss: float = float("nan")
    trigger_accuracy: float = float("nan")


def train(
    m: SageModel,
    g: AttributedGraph,
    masks: SplitMasks,
    trigger=None,
    cfg: Optional[TrainConfig] = None,
    *,
    early_stopping: bool = True,
) -> Tuple[SageModel, List[EpochRecord]]:
    """Minibatch training with optional joint trigger embedding.

    Each epoch shuffles the training ids, takes one Adam step per batch of
    ``cfg.batch_size`` nodes and, when ``trigger`` is given, one more step on
    a batch holding every trigger node labelled with the watermark.  With
    ``early_stopping`` the best-validation checkpoint is returned after
    ``cfg.early_stop_patience`` epochs without improvement; otherwise the
    final model is.  ``m`` itself is left untouched.
    """
    cfg = cfg or TrainConfig()
    train_ids = np.asarray(masks.train_ids, dtype=np.int64)
    if g.labels is None:
        raise ValueError("training graph has no labels")
    model = m.copy()
    history: List[EpochRecord] = []
    if cfg.epochs == 0:
        return model, history

    base = seed_bytes(cfg.seed)
    shuffle_stream = RandomStream(derive_seed(base, "shuffle"))
    sample_stream = RandomStream(derive_seed(base, "sample"))
    state = AdamState.zeros_like(model.params())
    early_stopping = early_stopping and len(masks.val_ids) > 0

    best = model.copy()
    best_val = -1.0
    since_best = 0
    for epoch in range(1, cfg.epochs + 1):
        order = train_ids[sample_distinct(shuffle_stream, len(train_ids), len(train_ids))]
        losses, sizes = [], []
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            probs, cache = forward(model, g, batch, "sampled", cfg.sample_size, sample_stream)
            losses.append(cross_entropy(probs, g.labels[batch]))
            sizes.append(len(batch))
            _apply(model, backward(model, cache, g.labels[batch]), state, cfg)

        record = EpochRecord(
            epoch=epoch,
            train_loss=float(np.average(losses, weights=sizes)) if losses else float("nan"),
            val_accuracy=float("nan"),
        )
        if trigger is not None:
            tg = trigger.graph
            all_nodes = np.arange(tg.num_nodes)
            probs, cache = forward(model, tg, all_nodes, "sampled", cfg.sample_size, sample_stream)
            record.trigger_loss = cross_entropy(probs, trigger.watermark)
            grads = backward(model, cache, trigger.watermark, weight=cfg.trigger_weight)
            _apply(model, grads, state, cfg)
            record.trigger_accuracy = float(
                np.mean(predict_labels(model, tg) == trigger.watermark)
            )

        if len(masks.val_ids):
            record.val_accuracy = accuracy(model, g, masks.val_ids)
        history.append(record)
        if not model.is_finite():
            raise FloatingPointError(f"non-finite parameters after epoch {epoch}")

        if not early_stopping:
            continue
        if record.val_accuracy > best_val:
            best_val = record.val_accuracy
            best = model.copy()
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.early_stop_patience:
                break

    return (best if early_stopping and best_val >= 0 else model), history
