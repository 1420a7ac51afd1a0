"""
Generating a keyed trigger graph
================================

A trigger is an Erdos-Renyi graph with random binary features and random
labels.  Everything is derived from a secret key, so the owner can rebuild
it exactly at verification time.
"""

import numpy as np

from gnn_watermark import flip_features, make_trigger

###########################################################################
# Cora-shaped trigger: 1433 features, 7 classes, 50 nodes.

t = make_trigger(b"my secret key", n=50, p_g=0.1, p_r=0.1, d=1433, c=7)
print(t.graph.num_nodes, "nodes,", t.graph.num_edges, "edges")
print("ones in the feature matrix:", int(t.graph.features.sum()))  # round(0.1 * 50 * 1433)
print("watermark:", t.watermark[:20], "...")

###########################################################################
# Same key, same trigger. A different key gives an unrelated one.

again = make_trigger(b"my secret key", 50, 0.1, 0.1, 1433, 7)
other = make_trigger(b"someone else", 50, 0.1, 0.1, 1433, 7)
print("rebuilt identically:", t.equals(again))
print("label agreement with another key:", np.mean(t.watermark == other.watermark))

###########################################################################
# Flipping every feature bit gives the complementary trigger, P_r -> 1 - P_r.

f = flip_features(t)
print("flipped P_r:", f.params.p_r, "ones:", int(f.graph.features.sum()))
