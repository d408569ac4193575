"""Graph-based SFA, information-preserving nodes and hierarchical networks."""
