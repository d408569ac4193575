"""Grid-structured networks of iGSFA/GSFA nodes, trained layer by layer.

Layer 0 is the input, a ``rows x cols`` grid of scalar units stored
row-major. A layer with fan-in ``(fr, fc)`` and stride ``(sr, sc)`` over a
``br x bc`` grid of units below has ``((br - fr) / sr + 1) x ((bc - fc) / sc + 1)``
nodes; node ``(r, c)`` reads the units ``(r*sr + i, c*sc + j)`` in row-major
order and concatenates their outputs. Every node is fit separately (no
weight sharing) with the same sample-level training graph.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import linalg

from .errors import ConfigError, NumericalError
from .expansions import ExpansionSpec
from .graphs import TrainingGraph
from .gsfa import PCAModel, train_pca
from .node import DEFAULT_DELTA_THRESHOLD, NodeError, train_gsfa_node, train_node

__all__ = [
    "LayerSpec",
    "NetworkSpec",
    "LayerPlan",
    "NetworkNode",
    "TrainedNetwork",
    "GlobalReconstructionModel",
    "build_network",
    "train_network",
    "extract_network",
    "fit_global_reconstruction",
    "e_rec",
    "load_preset",
    "list_presets",
]

PRESET_DIR = Path(__file__).with_name("presets")


def _pair(v, name) -> tuple[int, int]:
    if v is None:
        return None
    if isinstance(v, int):
        return (v, v)
    v = tuple(int(a) for a in v)
    if len(v) != 2:
        raise ConfigError(f"{name} must have two entries, got {v}")
    return v


@dataclass(frozen=True)
class LayerSpec:
    fan_in: tuple[int, int]
    output_dim: int
    stride: tuple[int, int] | None = None  # defaults to fan_in
    expansion: ExpansionSpec = field(default_factory=ExpansionSpec.identity)
    node_kind: str = "igsfa"
    delta_threshold: float = DEFAULT_DELTA_THRESHOLD
    n_slow: int | None = None
    scaling: str = "sensitivity"
    pre_pca_dim: int | None = None
    grid_shape: tuple[int, int] | None = None  # checked against the derived grid if given

    def __post_init__(self):
        object.__setattr__(self, "fan_in", _pair(self.fan_in, "fan_in"))
        object.__setattr__(self, "stride", _pair(self.stride, "stride") or self.fan_in)
        object.__setattr__(self, "grid_shape", _pair(self.grid_shape, "grid_shape"))
        if self.node_kind not in ("igsfa", "gsfa"):
            raise ConfigError(f"unknown node kind {self.node_kind!r}")
        if min(self.fan_in) < 1 or min(self.stride) < 1 or self.output_dim < 1:
            raise ConfigError("fan-in, stride and output_dim must be positive")

    @classmethod
    def from_json(cls, d: dict) -> "LayerSpec":
        known = {"fan_in", "stride", "output_dim", "expansion", "node_kind", "delta_threshold",
                 "n_slow", "scaling", "pre_pca_dim", "grid_shape"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown layer keys {sorted(unknown)}")
        kw = dict(d)
        kw["expansion"] = ExpansionSpec.from_json(d.get("expansion"))
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_json(self) -> dict:
        d = {"fan_in": list(self.fan_in), "stride": list(self.stride),
             "output_dim": self.output_dim, "expansion": self.expansion.to_json(),
             "node_kind": self.node_kind, "delta_threshold": self.delta_threshold,
             "scaling": self.scaling}
        for key in ("n_slow", "pre_pca_dim"):
            if getattr(self, key) is not None:
                d[key] = getattr(self, key)
        if self.grid_shape is not None:
            d["grid_shape"] = list(self.grid_shape)
        return d


@dataclass(frozen=True)
class NetworkSpec:
    input_shape: tuple[int, int]
    layers: tuple[LayerSpec, ...]
    name: str = "network"

    @classmethod
    def from_json(cls, d: dict) -> "NetworkSpec":
        shape = list(d["input_shape"])
        if len(shape) == 3:
            if shape[2] != 1:
                raise ConfigError("only single-channel inputs are supported")
            shape = shape[:2]
        layers = tuple(LayerSpec.from_json(l) for l in d["layers"])
        return cls(tuple(int(s) for s in shape), layers, d.get("name", "network"))

    def to_json(self) -> dict:
        return {"name": self.name, "input_shape": list(self.input_shape) + [1],
                "layers": [l.to_json() for l in self.layers]}

    @property
    def input_dim(self) -> int:
        return self.input_shape[0] * self.input_shape[1]

    def with_kind(self, node_kind: str, name: str | None = None) -> "NetworkSpec":
        """Same geometry with every node switched to ``node_kind``."""
        return NetworkSpec(self.input_shape, tuple(replace(l, node_kind=node_kind) for l in self.layers),
                           name or self.name)


def list_presets() -> list[str]:
    return sorted(p.stem for p in PRESET_DIR.glob("*.json"))


def load_preset(name: str) -> NetworkSpec:
    path = PRESET_DIR / f"{name}.json"
    if not path.exists():
        raise ConfigError(f"unknown network preset {name!r}; available: {', '.join(list_presets())}")
    return NetworkSpec.from_json(json.loads(path.read_text()))


# ---------------------------------------------------------------------------
# wiring


@dataclass(frozen=True)
class LayerPlan:
    grid_shape: tuple[int, int]
    inputs: np.ndarray  # (n_nodes, fan-in units * unit dim) indices into the layer below
    unit_dim_below: int
    receptive_units: np.ndarray  # (n_nodes, fan-in units) flat unit indices below

    @property
    def n_nodes(self) -> int:
        return self.inputs.shape[0]


def _grid_extent(below: int, fan: int, stride: int, layer: int, axis: str) -> int:
    if fan > below:
        raise ConfigError(f"layer {layer}: fan-in {fan} exceeds the {below} units below along {axis}")
    if stride > fan:
        raise ConfigError(f"layer {layer}: stride {stride} > fan-in {fan} along {axis} leaves "
                          "units of the layer below unconnected")
    if (below - fan) % stride:
        raise ConfigError(f"layer {layer}: fan-in {fan} with stride {stride} does not tile "
                          f"{below} units along {axis}")
    return (below - fan) // stride + 1


def build_network(spec: NetworkSpec) -> list[LayerPlan]:
    """Explicit per-node input index lists; validates geometry and coverage."""
    if not spec.layers:
        raise ConfigError("a network needs at least one layer")
    br, bc = spec.input_shape
    unit_dim = 1
    plans = []
    for k, layer in enumerate(spec.layers, start=1):
        fr, fc = layer.fan_in
        sr, sc = layer.stride
        gr = _grid_extent(br, fr, sr, k, "rows")
        gc = _grid_extent(bc, fc, sc, k, "cols")
        if layer.grid_shape is not None and layer.grid_shape != (gr, gc):
            raise ConfigError(f"layer {k}: declared grid {layer.grid_shape} but the geometry gives "
                              f"{(gr, gc)}")
        units = []
        for r in range(gr):
            for c in range(gc):
                rows = r * sr + np.arange(fr)
                cols = c * sc + np.arange(fc)
                units.append((rows[:, None] * bc + cols[None, :]).ravel())
        units = np.array(units)
        covered = np.zeros(br * bc, dtype=bool)
        covered[units.ravel()] = True
        if not covered.all():
            raise ConfigError(f"layer {k}: {int((~covered).sum())} units of the layer below are not read")
        inputs = (units[:, :, None] * unit_dim + np.arange(unit_dim)).reshape(len(units), -1)
        n_in = inputs.shape[1]
        if layer.pre_pca_dim is not None and layer.pre_pca_dim > n_in:
            raise ConfigError(f"layer {k}: pre-PCA keeps {layer.pre_pca_dim} of only {n_in} inputs")
        plans.append(LayerPlan((gr, gc), inputs, unit_dim, units))
        br, bc, unit_dim = gr, gc, layer.output_dim
    if (br, bc) != (1, 1):
        raise ConfigError(f"the top layer must be a single node, got a {br}x{bc} grid")
    return plans


# ---------------------------------------------------------------------------
# training and extraction


@dataclass(frozen=True)
class NetworkNode:
    model: object  # IGSFANodeModel or GSFANodeModel
    pre_pca: PCAModel | None = None

    def extract(self, X: np.ndarray) -> np.ndarray:
        if self.pre_pca is not None:
            X = self.pre_pca.apply(X)
        return self.model.extract(X)


@dataclass(frozen=True)
class TrainedNetwork:
    spec: NetworkSpec
    plans: list[LayerPlan]
    nodes: list[list[NetworkNode]]
    train_output: np.ndarray | None = None

    @property
    def output_dim(self) -> int:
        return self.spec.layers[-1].output_dim

    def extract(self, X, threads: int = 1) -> np.ndarray:
        return extract_network(self, X, threads)

    def extract_layers(self, X, threads: int = 1) -> list[np.ndarray]:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.spec.input_dim:
            raise NumericalError(f"network expects {self.spec.input_dim} inputs, got shape {X.shape}")
        outs = [X]
        for plan, layer_nodes in zip(self.plans, self.nodes):
            below = outs[-1]
            parts = _map(lambda k: layer_nodes[k].extract(below[:, plan.inputs[k]]),
                         range(plan.n_nodes), threads)
            outs.append(np.hstack(parts))
        return outs


def _map(fn, items, threads: int):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _train_one(layer: LayerSpec, X: np.ndarray, g: TrainingGraph) -> NetworkNode:
    pre = None
    if layer.pre_pca_dim is not None:
        pre = train_pca(X, layer.pre_pca_dim)
        X = pre.apply(X)
    if layer.node_kind == "gsfa":
        model = train_gsfa_node(X, g, layer.output_dim, layer.expansion)
    else:
        model = train_node(X, g, layer.output_dim, layer.delta_threshold, layer.expansion,
                           layer.scaling, layer.n_slow)
    return NetworkNode(model, pre)


def train_network(spec: NetworkSpec, X, g: TrainingGraph, threads: int = 1) -> TrainedNetwork:
    """Train layer 1 to the top; nodes within a layer are independent."""
    plans = build_network(spec)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != spec.input_dim:
        raise NumericalError(f"network expects {spec.input_dim} inputs, got shape {X.shape}")
    if X.shape[0] != g.n_samples:
        raise NumericalError(f"{X.shape[0]} samples but the graph has {g.n_samples}")
    below = X
    all_nodes = []
    for k, (layer, plan) in enumerate(zip(spec.layers, plans), start=1):
        gc = plan.grid_shape[1]

        def fit(i, below=below, layer=layer, plan=plan, k=k, gc=gc):
            try:
                return _train_one(layer, below[:, plan.inputs[i]], g)
            except NumericalError as exc:
                raise NodeError(f"layer {k}, node ({i // gc}, {i % gc}): {exc}") from exc

        nodes = _map(fit, range(plan.n_nodes), threads)
        below = np.hstack(_map(lambda i: nodes[i].extract(below[:, plan.inputs[i]]),
                               range(plan.n_nodes), threads))
        all_nodes.append(nodes)
    return TrainedNetwork(spec, plans, all_nodes, below)


def extract_network(net: TrainedNetwork, X, threads: int = 1) -> np.ndarray:
    return net.extract_layers(X, threads)[-1]


# ---------------------------------------------------------------------------
# global linear reconstruction


@dataclass(frozen=True)
class GlobalReconstructionModel:
    """``x_hat = D y + c`` fit by least squares on training features."""

    D: np.ndarray  # I x D_out
    c: np.ndarray

    def reconstruct(self, Y) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        if Y.shape[1] != self.D.shape[1]:
            raise NumericalError(f"reconstruction model expects {self.D.shape[1]} features, got {Y.shape[1]}")
        return Y @ self.D.T + self.c

    @classmethod
    def constant(cls, X) -> "GlobalReconstructionModel":
        X = np.asarray(X, dtype=float)
        return cls(np.zeros((X.shape[1], 0)), X.mean(axis=0))


def fit_global_reconstruction(Y_train, X_train) -> GlobalReconstructionModel:
    Y = np.asarray(Y_train, dtype=float)
    X = np.asarray(X_train, dtype=float)
    n, d = Y.shape
    if n <= d:
        raise NumericalError(f"need more samples than features to fit a reconstruction (N={n}, D={d})")
    design = np.hstack([Y, np.ones((n, 1))])
    coef, _, rank, _ = linalg.lstsq(design, X)
    if rank < d + 1:
        raise NumericalError(f"feature matrix is rank deficient ({rank} < {d + 1})")
    return GlobalReconstructionModel(coef[:d].T.copy(), coef[d].copy())


def e_rec(model: GlobalReconstructionModel, Y, X) -> float:
    """Residual energy over the energy around the evaluation-set mean."""
    X = np.asarray(X, dtype=float)
    resid = X - model.reconstruct(Y)
    centered = X - X.mean(axis=0)
    return float(np.sum(resid * resid) / np.sum(centered * centered))
