"""
One-bit ownership verification
==============================

A suspect model is queried on the regenerated trigger.  Under the null
hypothesis (not a copy) each label matches with probability 1/C, so the
match count is binomial and the decision is a tail test at ``alpha``.
"""

from gnn_watermark import (
    SageModel, TrainConfig, binomial_tail, decision_threshold, embed, make_synthetic, split_nodes,
    verify,
)

###########################################################################
# How many matches are needed? For 10 Cora nodes, 9 of 10.

for n in (10, 20, 50):
    k, frac = decision_threshold(n, 7, alpha=1e-6)
    print(f"n={n:3d}: need {k} matches ({frac:.2f}), P[X >= k] = {binomial_tail(n, k, 1 / 7):.2e}")

###########################################################################
# With 3 classes, 10 nodes can never reach 1e-6, so use 20.

g = make_synthetic(300, 3, 48, homophily=0.8, seed=5, signal=0.3, noise=0.15)
masks = split_nodes(g, (0.4, 0.2, 0.4), seed=11)
cfg = TrainConfig(hidden_dim=32, epochs=80, seed=3)
marked, _, _ = embed(g, masks, b"owner", 20, 0.0, 0.1, cfg)

report = verify(marked, b"owner", 20, 0.0, 0.1)
print("marked:   accuracy", report.watermark_accuracy, "p-value %.2e" % report.p_value, "->", report.decision)

stranger = SageModel.initialize(g.feature_dim, g.num_classes, 32, seed=99)
report = verify(stranger, b"owner", 20, 0.0, 0.1)
print("unrelated: accuracy", report.watermark_accuracy, "p-value %.2e" % report.p_value, "->", report.decision)
