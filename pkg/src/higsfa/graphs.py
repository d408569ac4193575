"""Training graphs for graph-based SFA.

A training graph attaches a positive weight ``v_n`` to every sample and a
symmetric positive weight ``gamma[n, n']`` to pairs of samples whose labels
are similar. Clustered and serial graphs have on the order of N**2 / L
edges, so they are stored structurally (group membership plus a scale) and
their difference moments are accumulated from per-group sums. Explicit
triple lists are used for the linear graph and for user supplied graphs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

__all__ = [
    "GraphError",
    "GraphWarning",
    "GroupStructure",
    "Finding",
    "TrainingGraph",
    "linear_graph",
    "clustered_graph",
    "serial_graph",
    "combine_graphs",
    "graph_from_edges",
    "validate_graph",
]

_REL_TOL = 1e-12
PROPORTIONALITY_TOL = 1e-6


class GraphError(ValueError):
    """Raised for malformed or degenerate training graphs."""


class GraphWarning(UserWarning):
    """Emitted when a graph is usable but violates a soft requirement."""


class Finding(NamedTuple):
    level: str  # "error" or "warning"
    message: str

    def __str__(self) -> str:
        return f"{self.level}: {self.message}"


@dataclass(frozen=True)
class GroupStructure:
    """Partition of the samples used by clustered and serial graphs."""

    kind: str
    group_of_sample: np.ndarray
    group_sizes: np.ndarray
    representative_labels: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("clustered", "serial", "generic"):
            raise GraphError(f"unknown group kind {self.kind!r}")
        if int(np.sum(self.group_sizes)) != len(self.group_of_sample):
            raise GraphError("group sizes do not sum to the number of samples")
        if self.representative_labels is not None and len(self.representative_labels) > 1:
            if np.any(np.diff(self.representative_labels) <= 0):
                raise GraphError("representative labels must be strictly increasing")

    @property
    def n_groups(self) -> int:
        return len(self.group_sizes)


# ---------------------------------------------------------------------------
# edge components


def _group_sums(X: np.ndarray, groups: np.ndarray, n_groups: int) -> np.ndarray:
    if X.shape[1] == 0:
        return np.zeros((n_groups, 0))
    return np.stack([np.bincount(groups, X[:, k], n_groups) for k in range(X.shape[1])], axis=1)


@dataclass(frozen=True)
class _ExplicitEdges:
    i: np.ndarray
    j: np.ndarray
    w: np.ndarray

    def edge_sum(self) -> float:
        return 2.0 * float(np.sum(self.w))

    def diff_sum(self, X):
        d = X[self.j] - X[self.i]
        return 2.0 * (d.T @ (self.w[:, None] * d))

    def degree(self, n):
        return np.bincount(self.i, self.w, n) + np.bincount(self.j, self.w, n)

    def edges(self):
        return self.i, self.j, self.w

    def scaled(self, c):
        return _ExplicitEdges(self.i, self.j, self.w * c)

    def permuted(self, new_index_of_old):
        a = new_index_of_old[self.i]
        b = new_index_of_old[self.j]
        return _ExplicitEdges(np.minimum(a, b), np.maximum(a, b), self.w)


@dataclass(frozen=True)
class _ClusteredEdges:
    """All within-class pairs, weight ``scale / (N_s - 1)``."""

    groups: np.ndarray
    sizes: np.ndarray
    scale: float = 1.0

    def _pair_weight(self):
        w = np.zeros(len(self.sizes))
        big = self.sizes >= 2
        w[big] = self.scale / (self.sizes[big] - 1.0)
        return w

    def edge_sum(self) -> float:
        w = self._pair_weight()
        return float(np.sum(w * self.sizes * (self.sizes - 1.0)))

    def diff_sum(self, X):
        # sum over ordered pairs in class s of d d^T = 2 (N_s sum xx^T - s s^T)
        w = self._pair_weight()
        coef = (w * self.sizes)[self.groups]
        G = _group_sums(X, self.groups, len(self.sizes))
        return 2.0 * (X.T @ (coef[:, None] * X) - G.T @ (w[:, None] * G))

    def degree(self, n):
        return (self._pair_weight() * (self.sizes - 1.0))[self.groups]

    def edges(self):
        w = self._pair_weight()
        ii, jj, ww = [], [], []
        for g in np.flatnonzero(self.sizes >= 2):
            members = np.flatnonzero(self.groups == g)
            a, b = np.triu_indices(len(members), k=1)
            ii.append(members[a])
            jj.append(members[b])
            ww.append(np.full(len(a), w[g]))
        return _concat_edges(ii, jj, ww)

    def scaled(self, c):
        return _ClusteredEdges(self.groups, self.sizes, self.scale * c)

    def permuted(self, new_index_of_old):
        groups = np.empty_like(self.groups)
        groups[new_index_of_old] = self.groups
        return _ClusteredEdges(groups, self.sizes, self.scale)


@dataclass(frozen=True)
class _SerialEdges:
    """All pairs between consecutive groups, weight ``scale``."""

    groups: np.ndarray
    sizes: np.ndarray
    scale: float = 1.0

    def _neighbour_count(self):
        sizes = self.sizes.astype(float)
        prev = np.concatenate([[0.0], sizes[:-1]])
        nxt = np.concatenate([sizes[1:], [0.0]])
        return prev + nxt

    def edge_sum(self) -> float:
        s = self.sizes.astype(float)
        return 2.0 * self.scale * float(np.sum(s[:-1] * s[1:]))

    def diff_sum(self, X):
        coef = self.scale * self._neighbour_count()[self.groups]
        G = _group_sums(X, self.groups, len(self.sizes))
        cross = G[:-1].T @ G[1:]
        return 2.0 * (X.T @ (coef[:, None] * X) - self.scale * (cross + cross.T))

    def degree(self, n):
        return self.scale * self._neighbour_count()[self.groups]

    def edges(self):
        ii, jj, ww = [], [], []
        for g in range(len(self.sizes) - 1):
            a = np.flatnonzero(self.groups == g)
            b = np.flatnonzero(self.groups == g + 1)
            A, B = np.meshgrid(a, b, indexing="ij")
            A, B = A.ravel(), B.ravel()
            ii.append(np.minimum(A, B))
            jj.append(np.maximum(A, B))
            ww.append(np.full(len(A), self.scale))
        return _concat_edges(ii, jj, ww)

    def scaled(self, c):
        return _SerialEdges(self.groups, self.sizes, self.scale * c)

    def permuted(self, new_index_of_old):
        groups = np.empty_like(self.groups)
        groups[new_index_of_old] = self.groups
        return _SerialEdges(groups, self.sizes, self.scale)


def _concat_edges(ii, jj, ww):
    if not ii:
        return (np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0))
    return (np.concatenate(ii).astype(np.int64), np.concatenate(jj).astype(np.int64),
            np.concatenate(ww).astype(float))


# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TrainingGraph:
    """Vertex weights plus a sum of edge components.

    ``edge_normalizer`` (R) counts every edge in both orientations and
    ``vertex_normalizer`` (Q_v) is the sum of the vertex weights. Both are
    computed once at construction.
    """

    n_samples: int
    vertex_weights: np.ndarray
    components: tuple = ()
    group_structure: GroupStructure | None = None
    name: str = "generic"
    edge_normalizer: float = field(init=False)
    vertex_normalizer: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "vertex_weights", np.asarray(self.vertex_weights, dtype=float))
        object.__setattr__(self, "edge_normalizer", float(sum(c.edge_sum() for c in self.components)))
        object.__setattr__(self, "vertex_normalizer", float(np.sum(self.vertex_weights)))

    @property
    def kind(self) -> str:
        return self.group_structure.kind if self.group_structure is not None else self.name

    def edge_arrays(self):
        """Materialize ``(i, j, w)`` with ``i < j``, duplicates summed."""
        parts = [c.edges() for c in self.components]
        i, j, w = _concat_edges([p[0] for p in parts], [p[1] for p in parts], [p[2] for p in parts])
        if len(i) == 0:
            return i, j, w
        key = i * self.n_samples + j
        uniq, inverse = np.unique(key, return_inverse=True)
        wsum = np.bincount(inverse, w)
        return uniq // self.n_samples, uniq % self.n_samples, wsum

    @property
    def edges(self) -> list[tuple[int, int, float]]:
        i, j, w = self.edge_arrays()
        return [(int(a), int(b), float(c)) for a, b, c in zip(i, j, w)]

    def weight_matrix(self) -> np.ndarray:
        """Dense symmetric edge-weight matrix; only sensible for small N."""
        G = np.zeros((self.n_samples, self.n_samples))
        i, j, w = self.edge_arrays()
        G[i, j] += w
        G[j, i] += w
        return G

    def degree(self) -> np.ndarray:
        deg = np.zeros(self.n_samples)
        for c in self.components:
            deg = deg + c.degree(self.n_samples)
        return deg

    def difference_scatter(self, X: np.ndarray) -> np.ndarray:
        """Sum over both orientations of ``gamma * (x_n' - x_n)(x_n' - x_n)^T``."""
        out = np.zeros((X.shape[1], X.shape[1]))
        for c in self.components:
            out += c.diff_sum(X)
        return out

    def scaled(self, edge_factor: float = 1.0, vertex_factor: float = 1.0) -> "TrainingGraph":
        if edge_factor <= 0 or vertex_factor <= 0:
            raise GraphError("scale factors must be positive")
        return TrainingGraph(self.n_samples, self.vertex_weights * vertex_factor,
                             tuple(c.scaled(edge_factor) for c in self.components),
                             self.group_structure, self.name)

    def permuted(self, order: Sequence[int]) -> "TrainingGraph":
        """Graph for the reordered samples ``X[order]``."""
        order = np.asarray(order)
        new_index_of_old = np.empty_like(order)
        new_index_of_old[order] = np.arange(len(order))
        gs = None
        if self.group_structure is not None:
            g = self.group_structure
            gs = GroupStructure(g.kind, g.group_of_sample[order], g.group_sizes, g.representative_labels)
        return TrainingGraph(self.n_samples, self.vertex_weights[order],
                             tuple(c.permuted(new_index_of_old) for c in self.components), gs, self.name)

    def __repr__(self) -> str:
        return (f"TrainingGraph(kind={self.kind!r}, n_samples={self.n_samples}, "
                f"R={self.edge_normalizer:g}, Q_v={self.vertex_normalizer:g})")


# ---------------------------------------------------------------------------
# constructors


def linear_graph(n_samples: int) -> TrainingGraph:
    """Chain graph over consecutive samples; GSFA on it reduces to SFA."""
    if n_samples < 3:
        raise GraphError(f"a linear graph needs at least 3 samples, got {n_samples}")
    i = np.arange(n_samples - 1)
    comp = _ExplicitEdges(i, i + 1, np.ones(n_samples - 1))
    return TrainingGraph(n_samples, np.ones(n_samples), (comp,), None, "linear")


def _dense_ids(values) -> tuple[np.ndarray, np.ndarray]:
    uniq, ids = np.unique(np.asarray(values), return_inverse=True)
    return uniq, ids.ravel()


def clustered_graph(class_of_sample) -> TrainingGraph:
    """Fully connected subgraph per class with weights ``1 / (N_s - 1)``."""
    class_of_sample = np.asarray(class_of_sample)
    if class_of_sample.size == 0:
        raise GraphError("clustered graph needs at least one sample")
    _, ids = _dense_ids(class_of_sample)
    sizes = np.bincount(ids)
    gs = GroupStructure("clustered", ids, sizes)
    n = len(ids)
    return TrainingGraph(n, np.ones(n), (_ClusteredEdges(ids, sizes),), gs, "clustered")


def serial_groups(labels, n_groups: int) -> np.ndarray:
    """Group index of every sample after a stable sort by label.

    Group sizes are ``N // n_groups``, with the remainder handed out one
    sample at a time starting from the first group.
    """
    labels = np.asarray(labels, dtype=float)
    n = len(labels)
    if n_groups < 2:
        raise GraphError("serial grouping needs at least 2 groups")
    if n < n_groups:
        raise GraphError(f"{n} samples cannot fill {n_groups} groups")
    base, rem = divmod(n, n_groups)
    sizes = np.full(n_groups, base)
    sizes[:rem] += 1
    order = np.argsort(labels, kind="stable")
    groups = np.empty(n, dtype=np.int64)
    groups[order] = np.repeat(np.arange(n_groups), sizes)
    return groups


def serial_graph(labels, n_groups: int) -> tuple[TrainingGraph, GroupStructure]:
    """Serial graph: consecutive label groups fully connected, weight 1.

    Vertices in the first and last group get weight 1, all others 2.
    """
    labels = np.asarray(labels, dtype=float)
    n = len(labels)
    if n_groups < 2:
        raise GraphError("a serial graph needs at least 2 groups")
    if n < n_groups:
        raise GraphError(f"serial graph with {n_groups} groups would have empty groups "
                         f"({n} samples)")
    groups = serial_groups(labels, n_groups)
    sizes = np.bincount(groups, minlength=n_groups)
    rep = np.bincount(groups, labels, n_groups) / sizes
    if np.any(np.diff(rep) <= 0):
        raise GraphError("label ties collapse neighbouring groups; use fewer groups")
    gs = GroupStructure("serial", groups, sizes, rep)
    v = np.full(n, 2.0)
    v[(groups == 0) | (groups == n_groups - 1)] = 1.0
    return TrainingGraph(n, v, (_SerialEdges(groups, sizes),), gs, "serial"), gs


def graph_from_edges(n_samples: int, edges, vertex_weights=None, validate: bool = True) -> TrainingGraph:
    """Generic loader for a user supplied triple list ``[(i, j, w), ...]``."""
    edges = list(edges)
    if edges:
        arr = np.asarray(edges, dtype=float)
        i, j, w = arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64), arr[:, 2]
    else:
        i = j = np.zeros(0, dtype=np.int64)
        w = np.zeros(0)
    v = np.ones(n_samples) if vertex_weights is None else np.asarray(vertex_weights, dtype=float)
    g = TrainingGraph(n_samples, v, (_ExplicitEdges(i, j, w),), None, "generic")
    if validate:
        errors = [f for f in validate_graph(g) if f.level == "error"]
        if errors:
            raise GraphError("; ".join(f.message for f in errors))
    return g


def combine_graphs(graphs: Sequence[TrainingGraph]) -> TrainingGraph:
    """Add vertex and edge weights of graphs over the same samples."""
    graphs = list(graphs)
    if not graphs:
        raise GraphError("cannot combine an empty list of graphs")
    n = graphs[0].n_samples
    for g in graphs[1:]:
        if g.n_samples != n:
            raise GraphError(f"graphs disagree on n_samples: {n} vs {g.n_samples}")
    ref = graphs[0].vertex_weights
    for g in graphs[1:]:
        if not _proportional(ref, g.vertex_weights):
            warnings.warn(f"vertex weights of {g.kind} graph are not proportional to those of "
                          f"{graphs[0].kind} graph", GraphWarning, stacklevel=2)
    if len(graphs) == 1:
        return graphs[0]
    v = np.sum([g.vertex_weights for g in graphs], axis=0)
    comps = tuple(c for g in graphs for c in g.components)
    return TrainingGraph(n, v, comps, None, "combined")


def _proportional(a: np.ndarray, b: np.ndarray) -> bool:
    ratio = np.sum(b) / np.sum(a)
    return bool(np.max(np.abs(b - ratio * a)) <= PROPORTIONALITY_TOL * np.max(np.abs(b)))


def validate_graph(g: TrainingGraph) -> list[Finding]:
    """Report structural problems without raising."""
    findings: list[Finding] = []
    n = g.n_samples
    v = g.vertex_weights
    if v.shape != (n,):
        findings.append(Finding("error", f"vertex weights have shape {v.shape}, expected ({n},)"))
        return findings
    for k in np.flatnonzero(v <= 0):
        findings.append(Finding("error", f"non-positive vertex weight at {k}"))
    for comp in g.components:
        if isinstance(comp, _ExplicitEdges):
            findings.extend(_check_explicit(comp, n))
    if not any(f.level == "error" for f in findings):
        for k in np.flatnonzero(g.degree() <= 0):
            findings.append(Finding("warning", f"isolated vertex {k}"))
    r = sum(c.edge_sum() for c in g.components)
    q = float(np.sum(v))
    if not np.isclose(g.edge_normalizer, r, rtol=_REL_TOL, atol=0.0):
        findings.append(Finding("error", f"edge normalizer {g.edge_normalizer} != recomputed {r}"))
    if not np.isclose(g.vertex_normalizer, q, rtol=_REL_TOL, atol=0.0):
        findings.append(Finding("error", f"vertex normalizer {g.vertex_normalizer} != recomputed {q}"))
    return findings


def _check_explicit(comp: _ExplicitEdges, n: int) -> list[Finding]:
    out = []
    i, j, w = comp.i, comp.j, comp.w
    bad = (i < 0) | (j < 0) | (i >= n) | (j >= n)
    for k in np.flatnonzero(bad):
        out.append(Finding("error", f"edge ({i[k]}, {j[k]}) has an index outside [0, {n})"))
    ok = ~bad
    for k in np.flatnonzero(ok & (i == j)):
        out.append(Finding("error", f"self-loop at {i[k]}"))
    for k in np.flatnonzero(ok & (i > j)):
        out.append(Finding("error", f"edge ({i[k]}, {j[k]}) stored with i > j breaks the symmetric layout"))
    for k in np.flatnonzero(w <= 0):
        out.append(Finding("error", f"non-positive edge weight {w[k]} on ({i[k]}, {j[k]})"))
    lo, hi = np.minimum(i, j), np.maximum(i, j)
    key = lo * n + hi
    uniq, counts = np.unique(key, return_counts=True)
    for kk in uniq[counts > 1]:
        out.append(Finding("error", f"duplicate edge ({kk // n}, {kk % n})"))
    return out
