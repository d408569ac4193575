"""
Inside one information-preserving node
======================================

A node splits its D outputs into a slow part (GSFA features with delta
below a threshold, rescaled to their reconstruction amplitude) and a
reconstructive part (principal components of what the slow part cannot
explain). This script walks through the pieces on a small mixture.
"""

import warnings

import numpy as np

from higsfa.graphs import linear_graph
from higsfa.gsfa import train_pca
from higsfa.node import NodeWarning, node_delta_report, node_signals, train_node

rng = np.random.default_rng(0)
t = np.linspace(0, 10 * np.pi, 2000)
sources = np.column_stack([np.sin(t), np.cos(1.7 * t), rng.standard_normal((2000, 4))])
X = sources @ rng.standard_normal((6, 6)).T
g = linear_graph(len(X))

# default threshold 1.96: the two smooth sources come out with delta near 0,
# and any noise direction that happens to fall below the threshold is kept too
node = train_node(X, g, output_dim=4)
print("GSFA deltas of the node:", np.round(node.gsfa.deltas, 3))
print("slow features kept:", node.n_slow)
print("delta of every output:  ", np.round(node_delta_report(node, X, g).deltas, 3))

# both parts are decorrelated on the training data
sig = node_signals(node, X)
cross = (sig.y_slow - sig.y_slow.mean(0)).T @ (sig.h - sig.h.mean(0)) / len(X)
print(f"largest slow/reconstructive covariance: {np.abs(cross).max():.1e}")

# with sensitivity scaling, each slow output moves the reconstruction by
# exactly its own change; with QR scaling the slow part is an isometry
qr = train_node(X, g, output_dim=4, scaling="qr")
s = node_signals(qr, X)
gap = np.abs(np.linalg.norm(s.a - qr.b, axis=1) - np.linalg.norm(s.y_slow, axis=1)).max()
print(f"QR mode: | ||a - b|| - ||y'|| | <= {gap:.1e}")

# a negative threshold keeps nothing slow and the node becomes PCA
pca_like = train_node(X, g, output_dim=4, delta_threshold=-1.0)
ref = train_pca(X, 4).apply(X)
Y = pca_like.extract(X)
print(f"threshold -1: max |output - PCA| up to sign = "
      f"{np.abs(np.abs(Y) - np.abs(ref)).max():.1e}")

# reconstruction improves as the reconstructive part grows
for d in range(2, 7):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NodeWarning)
        m = train_node(X, g, output_dim=d, n_slow=2)
    err = np.sum((m.reconstruct(m.extract(X)) - X) ** 2) / np.sum((X - X.mean(0)) ** 2)
    print(f"D = {d}: reconstruction error {err:.4f}")
