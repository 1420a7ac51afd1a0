"""Watermark-removal attacks: global magnitude pruning and fine-tuning."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .graph import AttributedGraph, SplitMasks
from .keyed_rand import RandomStream, derive_seed, sample_distinct, seed_bytes
from .sage import WEIGHT_NAMES, SageModel, TrainConfig, train


@dataclass(frozen=True)
class AttackConfig:
    pruning_rate: float = 0.5
    finetune_epochs: int = 10
    finetune_test_fraction: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.pruning_rate <= 1.0:
            raise ValueError("pruning_rate must lie in [0, 1]")
        if not 0.0 <= self.finetune_test_fraction <= 1.0:
            raise ValueError("finetune_test_fraction must lie in [0, 1]")
        if self.finetune_epochs < 0:
            raise ValueError("finetune_epochs must be non-negative")


def prune(m: SageModel, rate: float) -> SageModel:
    """Zero the ``floor(rate * P)`` smallest-magnitude weight entries, globally.

    ``P`` counts entries of ``w1``, ``w2`` and ``w_out``; biases are never
    pruned.  Equal magnitudes are ranked by position in the concatenated
    row-major weight vector.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"pruning rate must lie in [0, 1], got {rate}")
    pruned = m.copy()
    flat = np.concatenate([getattr(pruned, name).ravel() for name in WEIGHT_NAMES])
    count = int(np.floor(rate * flat.size))
    order = np.argsort(np.abs(flat), kind="stable")
    flat[order[:count]] = 0.0
    offset = 0
    for name in WEIGHT_NAMES:
        w = getattr(pruned, name)
        w[...] = flat[offset:offset + w.size].reshape(w.shape)
        offset += w.size
    return pruned


def finetune_ids(masks: SplitMasks, fraction: float, seed: int) -> np.ndarray:
    """Original training ids plus a seeded ``fraction`` of the test ids."""
    test = np.asarray(masks.test_ids, dtype=np.int64)
    k = int(np.floor(fraction * len(test) + 0.5))
    stream = RandomStream(derive_seed(seed_bytes(seed), "finetune"))
    picked = test[sample_distinct(stream, len(test), k)]
    return np.union1d(masks.train_ids, picked)


def finetune(
    m: SageModel,
    g: AttributedGraph,
    masks: SplitMasks,
    epochs: int,
    cfg: Optional[TrainConfig] = None,
    test_fraction: float = 0.3,
    original_epochs: Optional[int] = None,
) -> SageModel:
    """Adversarial fine-tuning for a fixed budget of ``epochs``.

    Uses fresh Adam state, no trigger and no early stopping.  When
    ``original_epochs`` is known the budget must stay below it.
    """
    cfg = cfg or TrainConfig()
    if epochs < 0:
        raise ValueError("epochs must be non-negative")
    if original_epochs is not None and epochs >= original_epochs:
        raise ValueError(
            f"fine-tuning budget {epochs} must be below the original {original_epochs} epochs"
        )
    if epochs == 0:
        return m.copy()
    ids = finetune_ids(masks, test_fraction, cfg.seed)
    tune_masks = SplitMasks(ids, np.array([], dtype=np.int64), np.array([], dtype=np.int64))
    tuned, _ = train(m, g, tune_masks, None, replace(cfg, epochs=epochs), early_stopping=False)
    return tuned
