"""Watermark embedding, extraction and one-bit ownership verification."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .graph import AttributedGraph, SplitMasks
from .sage import EpochRecord, SageModel, TrainConfig, predict_labels, train
from .trigger import TriggerGraph, make_trigger

DEFAULT_ALPHA = 1e-6


class ModelMismatchError(ValueError):
    """The suspect model cannot consume the trigger (wrong input dim or class count).

    Distinct from a negative verification: such a model is not a copy of
    the watermarked one at all.
    """


def binomial_tail(n: int, k: int, q: float) -> float:
    """P[X >= k] for X ~ Binomial(n, q), summed term by term in log space."""
    if n < 0 or not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got n={n}, k={k}")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    if k == 0 or q == 1.0:
        return 1.0
    if q == 0.0:
        return 0.0
    log_q, log_1q = math.log(q), math.log1p(-q)
    logs = [math.log(math.comb(n, i)) + i * log_q + (n - i) * log_1q for i in range(k, n + 1)]
    top = max(logs)
    return min(1.0, math.exp(top) * math.fsum(math.exp(v - top) for v in logs))


def decision_threshold(n: int, c: int, alpha: float = DEFAULT_ALPHA) -> Tuple[int, float]:
    """Smallest match count whose chance probability under the 1/C null is <= alpha.

    Returns ``(k, k / n)``; ``k == n + 1`` means no outcome is significant.
    """
    if n < 1 or c < 2:
        raise ValueError("need n >= 1 and c >= 2")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    for k in range(n + 1):
        if binomial_tail(n, k, 1.0 / c) <= alpha:
            return k, k / n
    return n + 1, (n + 1) / n


def watermark_accuracy(extracted: Sequence[int], expected: Sequence[int]) -> float:
    extracted, expected = np.asarray(extracted), np.asarray(expected)
    if extracted.shape != expected.shape:
        raise ValueError(f"length mismatch: {extracted.shape} vs {expected.shape}")
    if extracted.size == 0:
        raise ValueError("empty watermark")
    return float(np.mean(extracted == expected))


def embed(
    g: AttributedGraph,
    masks: SplitMasks,
    key: Union[bytes, str],
    n: int,
    p_g: float,
    p_r: float,
    cfg: Optional[TrainConfig] = None,
    model: Optional[SageModel] = None,
) -> Tuple[SageModel, TriggerGraph, List[EpochRecord]]:
    """Train a marked model: host data plus the trigger regenerated from ``key``."""
    cfg = cfg or TrainConfig()
    trigger = make_trigger(key, n, p_g, p_r, g.feature_dim, g.num_classes)
    if model is None:
        model = SageModel.initialize(g.feature_dim, g.num_classes, cfg.hidden_dim, cfg.seed)
    marked, history = train(model, g, masks, trigger, cfg)
    return marked, trigger, history


def extract(m: SageModel, t: TriggerGraph) -> np.ndarray:
    d, _, c = m.dims
    if t.graph.feature_dim != d:
        raise ModelMismatchError(
            f"trigger has {t.graph.feature_dim}-dim features but the model expects {d}"
        )
    if t.graph.num_classes != c:
        raise ModelMismatchError(
            f"trigger uses {t.graph.num_classes} classes but the model predicts {c}"
        )
    return predict_labels(m, t.graph)


@dataclass
class VerificationReport:
    extracted_labels: List[int]
    expected_labels: List[int]
    matches: int
    watermark_accuracy: float
    p_value: float
    min_matches: int
    threshold_accuracy: float
    decision: bool
    false_positive_budget: float = DEFAULT_ALPHA

    def to_dict(self) -> dict:
        return asdict(self)


def report_for(extracted, expected, num_classes: int, alpha: float = DEFAULT_ALPHA) -> VerificationReport:
    extracted = np.asarray(extracted, dtype=np.int64)
    expected = np.asarray(expected, dtype=np.int64)
    acc = watermark_accuracy(extracted, expected)
    n = len(expected)
    matches = int(np.sum(extracted == expected))
    k_star, threshold = decision_threshold(n, num_classes, alpha)
    return VerificationReport(
        extracted_labels=extracted.tolist(),
        expected_labels=expected.tolist(),
        matches=matches,
        watermark_accuracy=acc,
        p_value=binomial_tail(n, matches, 1.0 / num_classes),
        min_matches=k_star,
        threshold_accuracy=threshold,
        decision=matches >= k_star,
        false_positive_budget=alpha,
    )


def verify(
    m: SageModel,
    key: Union[bytes, str],
    n: int,
    p_g: float,
    p_r: float,
    dims: Optional[Tuple[int, int]] = None,
    alpha: float = DEFAULT_ALPHA,
) -> VerificationReport:
    """Regenerate the trigger from ``key`` and test ``m`` for the watermark.

    ``dims`` is the ``(feature_dim, num_classes)`` of the host dataset the
    watermark was embedded for; it defaults to the model's own.
    """
    d, _, c = m.dims
    if dims is not None and tuple(dims) != (d, c):
        raise ModelMismatchError(
            f"model has (feature_dim, classes) = {(d, c)}, trigger was made for {tuple(dims)}"
        )
    d, c = dims if dims is not None else (d, c)
    trigger = make_trigger(key, n, p_g, p_r, d, c)
    return report_for(extract(m, trigger), trigger.watermark, c, alpha)
