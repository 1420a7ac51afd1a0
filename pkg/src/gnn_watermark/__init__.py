"""Black-box ownership watermarks for GraphSAGE node classifiers.

A secret key deterministically generates an Erdos-Renyi trigger graph with
random binary features and random labels.  Training the host model on its
normal data plus the trigger embeds the labels; querying a suspect model
with the regenerated trigger and testing the matches against a 1/C chance
null verifies ownership.
"""

from .attacks import AttackConfig, finetune, prune
from .checkpoint import load_model, save_model
from .datasets import (
    CORA,
    PUBMED,
    DatasetSpec,
    load_cora,
    load_dataset,
    load_graph,
    load_pubmed,
    make_synthetic,
    save_graph,
)
from .graph import AttributedGraph, SplitMasks, build_graph, split_nodes
from .keyed_rand import RandomStream, derive_seed, sample_distinct
from .sage import SageModel, TrainConfig, accuracy, forward, predict_labels, train
from .trigger import TriggerGraph, flip_features, make_trigger
from .watermark import (
    ModelMismatchError,
    VerificationReport,
    binomial_tail,
    decision_threshold,
    embed,
    extract,
    verify,
    watermark_accuracy,
)

__version__ = "0.1.0"
