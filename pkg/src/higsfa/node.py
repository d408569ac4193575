"""Information-preserving GSFA node (iGSFA) and the plain GSFA node.

An iGSFA node emits ``y = y' | h``: a slow part ``y'`` made of the GSFA
features with delta below ``delta_threshold`` (rescaled so their amplitude
matches their contribution to a linear reconstruction of the input), and a
reconstructive part ``h`` holding the leading principal components of what
the slow part fails to reconstruct.

Training (per node)::

    x' = x - mean(x)                 z = expansion(x')
    s  = GSFA(z)                     s' = s[:J]   (delta < threshold)
    M, b = lstsq(s' -> x')           y' = R s' (QR) or Lambda s' (sensitivity)
    u  = x' - (B y' + b)             h  = PCA_{D-J}(u)

where ``B`` is ``Q`` in QR mode and ``M Lambda^-1`` in sensitivity mode.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import linalg

from .errors import NumericalError
from .expansions import ExpansionSpec
from .graphs import TrainingGraph
from .gsfa import DeltaReport, GSFAError, GSFAModel, PCAModel, delta_of, train_gsfa, train_pca

__all__ = [
    "NodeError",
    "NodeWarning",
    "IGSFANodeModel",
    "GSFANodeModel",
    "NodeSignals",
    "train_node",
    "train_gsfa_node",
    "extract_node",
    "reconstruct_node",
    "node_signals",
    "node_delta_report",
]

DEFAULT_DELTA_THRESHOLD = 1.96
SCALE_FLOOR_REL = 1e-6
SCALING_MODES = ("sensitivity", "qr")


class NodeError(NumericalError):
    pass


class NodeWarning(UserWarning):
    pass


class NodeSignals(NamedTuple):
    z: np.ndarray
    s_slow: np.ndarray
    y_slow: np.ndarray
    a: np.ndarray
    u: np.ndarray
    h: np.ndarray
    y: np.ndarray


@dataclass(frozen=True)
class IGSFANodeModel:
    input_dim: int
    output_dim: int
    delta_threshold: float
    expansion: ExpansionSpec
    x_mean: np.ndarray
    gsfa: GSFAModel
    n_slow: int
    M: np.ndarray  # I x J
    b: np.ndarray
    scaling: str
    Q: np.ndarray | None
    R: np.ndarray | None
    lambdas: np.ndarray | None
    pca: PCAModel
    scale_floor: float
    forced_slow: int | None = None

    kind = "igsfa"

    @property
    def expanded_dim(self) -> int:
        return self.gsfa.input_dim

    @property
    def slow_map(self) -> np.ndarray:
        """Matrix taking the scaled slow part back to input space (I x J)."""
        if self.scaling == "qr":
            return self.Q
        return self.M / self.lambdas

    def scale_slow(self, s: np.ndarray) -> np.ndarray:
        if self.scaling == "qr":
            return s @ self.R.T
        return s * self.lambdas

    def extract(self, X) -> np.ndarray:
        return extract_node(self, X)

    def reconstruct(self, Y) -> np.ndarray:
        return reconstruct_node(self, Y)


@dataclass(frozen=True)
class GSFANodeModel:
    """Plain GSFA node: expansion followed by the D slowest features."""

    input_dim: int
    output_dim: int
    expansion: ExpansionSpec
    x_mean: np.ndarray
    gsfa: GSFAModel

    kind = "gsfa"

    def extract(self, X) -> np.ndarray:
        X = _as_batch(X, self.input_dim)
        Z = self.expansion(X - self.x_mean)
        return self.gsfa.extract(Z)


def _as_batch(X, input_dim: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != input_dim:
        raise NodeError(f"node expects samples of dimension {input_dim}, got shape {X.shape}")
    return X


def _expand_centered(X, expansion: ExpansionSpec, output_dim: int):
    n, i = X.shape
    if n <= output_dim:
        raise NodeError(f"need more samples than output dimensions (N={n}, D={output_dim})")
    x_mean = X.mean(axis=0)
    Z = expansion(X - x_mean)
    if output_dim > Z.shape[1]:
        raise NodeError(f"output dimension {output_dim} exceeds the expanded dimension {Z.shape[1]}")
    return x_mean, Z


def train_gsfa_node(X, g: TrainingGraph, output_dim: int,
                    expansion: ExpansionSpec | None = None) -> GSFANodeModel:
    expansion = expansion or ExpansionSpec.identity()
    X = np.asarray(X, dtype=float)
    x_mean, Z = _expand_centered(X, expansion, output_dim)
    try:
        gsfa = train_gsfa(Z, g, output_dim)
    except GSFAError as exc:
        raise NodeError(str(exc)) from exc
    return GSFANodeModel(X.shape[1], output_dim, expansion, x_mean, gsfa)


def train_node(X, g: TrainingGraph, output_dim: int,
               delta_threshold: float = DEFAULT_DELTA_THRESHOLD,
               expansion: ExpansionSpec | None = None,
               scaling: str = "sensitivity",
               n_slow: int | None = None,
               extra_features: int = 0) -> IGSFANodeModel:
    """Train an iGSFA node.

    Parameters
    ----------
    X : (N, I) array
    g : training graph over the N samples
    output_dim : D, total number of output features
    delta_threshold : slow features with delta strictly below it are kept
    expansion : nonlinear expansion applied to the centered input
    scaling : ``"sensitivity"`` (column norms of M) or ``"qr"``
    n_slow : force the size of the slow part, bypassing ``delta_threshold``
    extra_features : additional GSFA features computed for diagnostics only
    """
    if scaling not in SCALING_MODES:
        raise NodeError(f"unknown scaling mode {scaling!r}")
    if not np.isfinite(delta_threshold):
        raise NodeError("delta_threshold must be finite")
    expansion = expansion or ExpansionSpec.identity()
    X = np.asarray(X, dtype=float)
    n, input_dim = X.shape
    x_mean, Z = _expand_centered(X, expansion, output_dim)
    Xc = X - x_mean

    j_max = min(Z.shape[1], output_dim)
    gsfa = train_gsfa(Z, g, j_max + extra_features, allow_fewer=True)
    j_max = min(j_max, gsfa.n_features)
    if n_slow is not None:
        J = min(int(n_slow), j_max)
    else:
        J = int(np.sum(gsfa.deltas[:j_max] < delta_threshold))

    S = gsfa.extract(Z)[:, :J]
    design = np.hstack([S, np.ones((n, 1))])
    coef, *_ = linalg.lstsq(design, Xc)
    M = coef[:J].T.copy()
    b = coef[J].copy()

    col_norms = np.linalg.norm(M, axis=0)
    top = float(col_norms.max()) if J else 0.0
    floor = SCALE_FLOOR_REL * top if top > 0 else SCALE_FLOOR_REL
    Q = R = lambdas = None
    if scaling == "qr":
        if J > input_dim:
            raise NodeError(f"QR scaling needs J <= I, got J={J}, I={input_dim}")
        Q, R = np.linalg.qr(M)
        signs = np.where(np.diag(R) < 0, -1.0, 1.0)
        Q = Q * signs
        R = signs[:, None] * R
        diag = np.diag(R).copy()
        R[np.diag_indices(J)] = np.maximum(diag, floor)
        y_slow = S @ R.T
        a = y_slow @ Q.T + b
    else:
        lambdas = np.maximum(col_norms, floor)
        y_slow = S * lambdas
        a = S @ M.T + b

    U = Xc - a
    n_rec = output_dim - J
    try:
        pca = train_pca(U, n_rec)
    except GSFAError as exc:
        raise NodeError(f"{exc}; with {J} slow features the achievable output dimension is "
                        f"{J + _rank(U)}") from exc
    if n_rec == 0:
        warnings.warn(f"all {output_dim} outputs are slow features; the node has no "
                      "reconstructive part", NodeWarning, stacklevel=2)

    return IGSFANodeModel(input_dim, output_dim, float(delta_threshold), expansion, x_mean,
                          gsfa, J, M, b, scaling, Q, R, lambdas, pca, floor,
                          None if n_slow is None else int(n_slow))


def _rank(U: np.ndarray) -> int:
    s = linalg.svdvals(U - U.mean(axis=0))
    return int(np.sum(s > 1e-9 * s[0])) if s.size and s[0] > 0 else 0


def node_signals(m: IGSFANodeModel, X) -> NodeSignals:
    X = _as_batch(X, m.input_dim)
    Xc = X - m.x_mean
    Z = m.expansion(Xc)
    S = m.gsfa.extract(Z)[:, :m.n_slow]
    y_slow = m.scale_slow(S)
    a = y_slow @ m.slow_map.T + m.b
    U = Xc - a
    H = m.pca.apply(U)
    return NodeSignals(Z, S, y_slow, a, U, H, np.hstack([y_slow, H]))


def extract_node(m: IGSFANodeModel, X) -> np.ndarray:
    """Features of one sample (1-D input) or of a batch of samples (rows)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        return node_signals(m, X[None, :]).y[0]
    return node_signals(m, X).y


def reconstruct_node(m: IGSFANodeModel, Y) -> np.ndarray:
    """Linear input reconstruction from node outputs."""
    Y = np.asarray(Y, dtype=float)
    single = Y.ndim == 1
    Y = np.atleast_2d(Y)
    if Y.shape[1] != m.output_dim:
        raise NodeError(f"node has {m.output_dim} outputs, got {Y.shape[1]}")
    y_slow, h = Y[:, :m.n_slow], Y[:, m.n_slow:]
    X = y_slow @ m.slow_map.T + m.b + m.pca.invert(h) + m.x_mean
    return X[0] if single else X


def node_delta_report(m, X, g: TrainingGraph) -> DeltaReport:
    return delta_of(m.extract(X), g)
