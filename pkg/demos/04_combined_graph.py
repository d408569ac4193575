"""
Learning three labels at once with a combined graph
===================================================

A numeric label and two binary labels have independent causes. A serial
graph for the numeric label and one clustered graph per binary label are
added into one training graph, so the slowest features encode all three.
Each part is first scaled to the same total edge weight; without that,
the serial graph dominates and the binary labels get fewer features.
"""

import copy
import warnings

from higsfa.experiment import load_experiment_preset, run
from higsfa.graphs import GraphWarning

warnings.simplefilter("ignore", GraphWarning)

cfg = load_experiment_preset("multilabel")


def report(cfg, title):
    m = run(cfg).metrics["methods"]
    print(title)
    for name, entry in m.items():
        rates = entry["classification"]
        print(f"  {name:7s} theta rho {entry['regression']['rho']:.3f}   "
              f"b1 {rates['b1']:.3f}   b2 {rates['b2']:.3f}")


report(cfg, "balanced combined graph")

plain = copy.deepcopy(cfg)
plain.graph["balance"] = False
report(plain, "\nplain sum of the three graphs")
