"""Graph-based SFA as a symmetric generalized eigenproblem, plus PCA.

GSFA minimizes the weighted delta value

    Delta_j = 1/R * sum_{n,n'} gamma[n,n'] * (y_j(n') - y_j(n))**2

subject to weighted zero mean, unit variance and decorrelation under the
vertex weights. With the weighted covariance ``C`` and the difference
covariance ``Cdot`` this is ``Cdot w = Delta C w``; it is solved by
whitening ``C`` (dropping directions below a relative eigenvalue threshold)
and diagonalizing the whitened ``Cdot``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import linalg

from .errors import NumericalError
from .graphs import TrainingGraph, linear_graph

__all__ = [
    "GSFAError",
    "Moments",
    "GSFAModel",
    "DeltaReport",
    "PCAModel",
    "weighted_moments",
    "train_gsfa",
    "train_sfa",
    "extract_gsfa",
    "delta_of",
    "train_pca",
    "apply_pca",
    "invert_pca",
]

RANK_TOL = 1e-9


class GSFAError(NumericalError):
    pass


class Moments(NamedTuple):
    mean: np.ndarray
    cov: np.ndarray
    dcov: np.ndarray


def _check_graph(X: np.ndarray, g: TrainingGraph) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise GSFAError(f"expected a 2-D sample matrix, got shape {X.shape}")
    if X.shape[0] != g.n_samples:
        raise GSFAError(f"data has {X.shape[0]} samples but the graph has {g.n_samples}")
    if X.shape[0] < 2:
        raise GSFAError("at least 2 samples are required")
    return X


def weighted_moments(X, g: TrainingGraph, method: str = "fast") -> Moments:
    """Weighted mean, weighted covariance and difference covariance.

    ``method="fast"`` accumulates clustered/serial graphs from group sums in
    O(N I^2); ``method="pairs"`` enumerates every stored edge.
    """
    X = _check_graph(X, g)
    if g.edge_normalizer <= 0:
        raise GSFAError("the training graph has no edges")
    v = g.vertex_weights
    mean = (v @ X) / g.vertex_normalizer
    Xc = X - mean
    cov = (Xc.T @ (v[:, None] * Xc)) / g.vertex_normalizer
    if method == "fast":
        scatter = g.difference_scatter(Xc)
    elif method == "pairs":
        i, j, w = g.edge_arrays()
        d = Xc[j] - Xc[i]
        scatter = 2.0 * (d.T @ (w[:, None] * d))
    else:
        raise ValueError(f"unknown moment method {method!r}")
    dcov = scatter / g.edge_normalizer
    return Moments(mean, 0.5 * (cov + cov.T), 0.5 * (dcov + dcov.T))


def _fix_row_signs(W: np.ndarray) -> np.ndarray:
    if W.size == 0:
        return W
    idx = np.argmax(np.abs(W), axis=1)
    signs = np.sign(W[np.arange(W.shape[0]), idx])
    signs[signs == 0] = 1.0
    return W * signs[:, None]


@dataclass(frozen=True)
class GSFAModel:
    """Linear GSFA projection ``y = W (x - offset)``.

    Rows of ``projection`` are ordered by ascending delta value and each row's
    largest-magnitude entry is positive.
    """

    projection: np.ndarray
    input_offset: np.ndarray
    deltas: np.ndarray
    rank_used: int

    @property
    def input_dim(self) -> int:
        return self.projection.shape[1]

    @property
    def n_features(self) -> int:
        return self.projection.shape[0]

    def extract(self, X) -> np.ndarray:
        return extract_gsfa(self, X)

    def truncated(self, n_features: int) -> "GSFAModel":
        return GSFAModel(self.projection[:n_features], self.input_offset,
                         self.deltas[:n_features], self.rank_used)


def train_gsfa(X, g: TrainingGraph, n_features: int, rank_tol: float = RANK_TOL,
               allow_fewer: bool = False) -> GSFAModel:
    """Solve the GSFA problem for the ``n_features`` slowest features.

    With ``allow_fewer`` a rank-deficient problem returns as many features as
    the truncated whitening supports instead of raising.
    """
    mean, C, Cdot = weighted_moments(X, g)
    lam, U = linalg.eigh(C)
    if lam[-1] <= 0:
        raise GSFAError("the data have zero weighted variance")
    keep = lam > rank_tol * lam[-1]
    rank = int(np.sum(keep))
    if n_features > rank and allow_fewer:
        n_features = rank
    if n_features > rank:
        raise GSFAError(f"requested {n_features} features but the weighted covariance has "
                        f"rank {rank} after truncation; at most {rank} are achievable")
    whiten = U[:, keep] / np.sqrt(lam[keep])
    Cw = whiten.T @ Cdot @ whiten
    delta, V = linalg.eigh(0.5 * (Cw + Cw.T))
    W = (whiten @ V[:, :n_features]).T
    W = _fix_row_signs(W)
    return GSFAModel(W, mean, delta[:n_features].copy(), rank)


def train_sfa(X, n_features: int) -> GSFAModel:
    """Plain SFA on a time series, i.e. GSFA on the linear graph."""
    X = np.asarray(X, dtype=float)
    return train_gsfa(X, linear_graph(len(X)), n_features)


def extract_gsfa(m: GSFAModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != m.input_dim:
        raise GSFAError(f"model expects {m.input_dim} inputs, got {X.shape[-1]}")
    return (X - m.input_offset) @ m.projection.T


@dataclass(frozen=True)
class DeltaReport:
    deltas: np.ndarray
    zero_variance: np.ndarray
    graph: str
    n_samples: int

    def to_json(self) -> dict:
        return {"graph": self.graph, "n_samples": self.n_samples,
                "deltas": [float(d) for d in self.deltas],
                "zero_variance": [bool(z) for z in self.zero_variance]}


def delta_of(Y, g: TrainingGraph) -> DeltaReport:
    """Delta value of every column of ``Y`` after weighted variance normalization."""
    Y = _check_graph(np.atleast_2d(np.asarray(Y, dtype=float).T).T, g)
    mean, C, Cdot = weighted_moments(Y, g)
    var = np.diag(C).copy()
    scale = np.maximum(np.mean(Y * Y, axis=0), np.finfo(float).tiny)
    flat = var <= 1e-20 * scale
    deltas = np.zeros(Y.shape[1])
    deltas[~flat] = np.diag(Cdot)[~flat] / var[~flat]
    return DeltaReport(deltas, flat, g.kind, g.n_samples)


# ---------------------------------------------------------------------------
# PCA


@dataclass(frozen=True)
class PCAModel:
    mean: np.ndarray
    components: np.ndarray  # d x I, orthonormal rows
    variances: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.mean.shape[0]

    @property
    def output_dim(self) -> int:
        return self.components.shape[0]

    def apply(self, X):
        return apply_pca(self, X)

    def invert(self, Y):
        return invert_pca(self, Y)


def train_pca(X, d: int, rank_tol: float = RANK_TOL) -> PCAModel:
    """Principal components by eigendecomposition of the (1/N) covariance."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise GSFAError(f"expected a non-empty 2-D sample matrix, got shape {X.shape}")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = (Xc.T @ Xc) / X.shape[0]
    lam, U = linalg.eigh(0.5 * (cov + cov.T))
    lam, U = lam[::-1], U[:, ::-1]
    top = lam[0] if lam.size else 0.0
    rank = int(np.sum(lam > rank_tol * top)) if top > 0 else 0
    if d < 0 or d > rank:
        raise GSFAError(f"requested {d} principal components but the data have rank {rank}")
    comps = _fix_row_signs(U[:, :d].T.copy())
    return PCAModel(mean, comps, lam[:d].copy())


def apply_pca(m: PCAModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != m.input_dim:
        raise GSFAError(f"PCA expects {m.input_dim} inputs, got {X.shape[-1]}")
    return (X - m.mean) @ m.components.T


def invert_pca(m: PCAModel, Y) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    if Y.shape[-1] != m.output_dim:
        raise GSFAError(f"PCA has {m.output_dim} components, got {Y.shape[-1]}")
    return Y @ m.components + m.mean
