"""
Why a hierarchy of slow feature nodes can lose the slowest signal
=================================================================

Four +-1 chains flip sign with probabilities 0.05, 0.1, 0.2 and 0.5, so
s1 is the slowest and n is white noise. The network sees
(s2, s1*n, s3, n): s1 is only visible as the product of the second and
fourth inputs, which sit in different bottom nodes.
"""

import numpy as np

from higsfa.datasets import gen_toy_infoloss
from higsfa.graphs import linear_graph
from higsfa.gsfa import delta_of
from higsfa.hierarchy import load_preset, train_network

data = gen_toy_infoloss(100_000, seed=1)
g = linear_graph(data.n_samples)

# each chain has delta 4p; the product s1*n is as fast as n itself
latents = np.column_stack([data.latents[k] for k in ("s1", "s2", "s3", "n")])
print("delta of s1, s2, s3, n:", np.round(delta_of(latents, g).deltas, 3))
print("delta of the inputs:   ", np.round(delta_of(data.X, g).deltas, 3))


def corr(y, name):
    return abs(np.corrcoef(y, data.latents[name])[0, 1])


# Plain GSFA nodes keep one feature each. The left node keeps s2 and drops
# s1*n (delta 2.0), so the top node never gets a chance to multiply it by n.
hgsfa = train_network(load_preset("toy_hgsfa"), data.X, g)
y = hgsfa.train_output[:, 0]
print(f"\nHGSFA top feature:  |rho(s1)| = {corr(y, 's1'):.3f}   |rho(s2)| = {corr(y, 's2'):.3f}")

# iGSFA nodes keep one slow feature plus one reconstructive (PCA) feature of
# the residual. The left node passes s1*n upward, the right node passes n,
# and the quadratic top node can form (s1*n)*n = s1.
higsfa = train_network(load_preset("toy_higsfa"), data.X, g)
y = higsfa.train_output[:, 0]
print(f"HiGSFA top feature: |rho(s1)| = {corr(y, 's1'):.3f}   |rho(s2)| = {corr(y, 's2'):.3f}")

bottom = higsfa.nodes[0][0].model
print(f"\nleft bottom node: {bottom.n_slow} slow feature, delta {bottom.gsfa.deltas[0]:.3f}")
