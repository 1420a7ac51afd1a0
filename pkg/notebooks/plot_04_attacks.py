"""
Pruning and fine-tuning attacks
===============================

An adversary holding the marked model may prune its smallest weights or
keep training it on their own labelled data.
"""

from gnn_watermark import (
    TrainConfig, embed, extract, finetune, make_synthetic, prune, split_nodes, watermark_accuracy,
)

g = make_synthetic(300, 3, 48, homophily=0.8, seed=5, signal=0.3, noise=0.15)
masks = split_nodes(g, (0.4, 0.2, 0.4), seed=11)
cfg = TrainConfig(hidden_dim=32, epochs=80, seed=3)
marked, trigger, _ = embed(g, masks, b"owner", 10, 0.0, 0.1, cfg)


def wm(model):
    return watermark_accuracy(extract(model, trigger), trigger.watermark)


###########################################################################
# Global magnitude pruning over all weight matrices (biases kept).

for rate in (0.0, 0.3, 0.5, 0.7, 0.9):
    print(f"pruned {rate:.0%}: watermark accuracy {wm(prune(marked, rate)):.2f}")

###########################################################################
# Fine-tuning on the training nodes plus 30% of the test nodes, fresh Adam.

for epochs in (10, 20, 30):
    print(f"fine-tuned {epochs} epochs: watermark accuracy {wm(finetune(marked, g, masks, epochs, cfg)):.2f}")
