"""Supervised step after dimensionality reduction.

Gaussian class models over the first few slow features give posteriors
``P(C_l | y)``; the soft label estimate is the posterior-weighted mean of
the class representative labels. Metrics are MAE, RMSE and the cumulative
score ``CS(k)``, the fraction of estimates with absolute error ``<= k``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from .errors import NumericalError

__all__ = [
    "SupervisedError",
    "GaussianClassifier",
    "SoftEstimatorModel",
    "Metrics",
    "train_gaussian_classifier",
    "train_soft_estimator",
    "soft_estimate",
    "classify",
    "posteriors",
    "evaluate",
    "chance_level",
    "DEFAULT_SHRINKAGE",
]

DEFAULT_SHRINKAGE = 0.01
ROUNDING_MODES = ("raw", "floor")


class SupervisedError(NumericalError):
    pass


@dataclass(frozen=True)
class GaussianClassifier:
    """Full-covariance Gaussian per class with diagonal shrinkage."""

    means: np.ndarray  # K x J
    chols: np.ndarray  # K x J x J lower Cholesky factors
    log_priors: np.ndarray
    shrinkage: float

    @property
    def n_classes(self) -> int:
        return self.means.shape[0]

    @property
    def n_features(self) -> int:
        return self.means.shape[1]

    @property
    def priors(self) -> np.ndarray:
        return np.exp(self.log_priors)

    @property
    def covariances(self) -> np.ndarray:
        return np.einsum("kij,klj->kil", self.chols, self.chols)

    def log_likelihoods(self, Y) -> np.ndarray:
        """``log p(y | C_k) + log P(C_k)`` for every sample and class."""
        Y = _as_features(Y, self.n_features)
        out = np.empty((Y.shape[0], self.n_classes))
        const = 0.5 * self.n_features * np.log(2.0 * np.pi)
        for k in range(self.n_classes):
            L = self.chols[k]
            z = linalg.solve_triangular(L, (Y - self.means[k]).T, lower=True)
            logdet = np.sum(np.log(np.diag(L)))
            out[:, k] = -0.5 * np.sum(z * z, axis=0) - logdet - const + self.log_priors[k]
        return out

    def posteriors(self, Y) -> np.ndarray:
        ll = self.log_likelihoods(Y)
        return np.exp(ll - logsumexp(ll, axis=1, keepdims=True))

    def classify(self, Y) -> np.ndarray:
        return np.argmax(self.log_likelihoods(Y), axis=1)


def _as_features(Y, j: int) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[None, :]
    if Y.shape[1] != j:
        raise SupervisedError(f"model uses {j} features, got {Y.shape[1]}")
    return Y


def train_gaussian_classifier(Y, class_ids, shrinkage: float = DEFAULT_SHRINKAGE,
                              n_classes: int | None = None) -> GaussianClassifier:
    """Fit one Gaussian per class id ``0 .. K-1``; each class needs ``2 J`` samples."""
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    ids = np.asarray(class_ids)
    if not np.issubdtype(ids.dtype, np.integer):
        if np.any(ids != np.round(ids)):
            raise SupervisedError("class ids must be integers")
        ids = ids.astype(np.int64)
    if len(ids) != Y.shape[0]:
        raise SupervisedError(f"{len(ids)} class ids for {Y.shape[0]} samples")
    if not 0 <= shrinkage <= 1:
        raise SupervisedError("shrinkage must lie in [0, 1]")
    K = int(ids.max()) + 1 if n_classes is None else n_classes
    j = Y.shape[1]
    means = np.empty((K, j))
    chols = np.empty((K, j, j))
    counts = np.bincount(ids, minlength=K)
    for k in range(K):
        if counts[k] < 2 * j:
            raise SupervisedError(f"class {k} has {counts[k]} samples; at least {2 * j} are needed "
                                  f"for {j} features")
        Yk = Y[ids == k]
        means[k] = Yk.mean(axis=0)
        C = np.cov(Yk, rowvar=False, bias=True).reshape(j, j)
        C = (1.0 - shrinkage) * C + shrinkage * np.diag(np.diag(C))
        try:
            chols[k] = linalg.cholesky(C, lower=True)
        except linalg.LinAlgError as exc:
            raise SupervisedError(f"covariance of class {k} is singular after shrinkage") from exc
    log_priors = np.log(counts / counts.sum())
    return GaussianClassifier(means, chols, log_priors, float(shrinkage))


@dataclass(frozen=True)
class SoftEstimatorModel:
    classifier: GaussianClassifier
    representative_labels: np.ndarray
    group_edges: np.ndarray  # label value at which each class starts (sorted order)

    @property
    def n_classes(self) -> int:
        return self.classifier.n_classes

    @property
    def n_features(self) -> int:
        return self.classifier.n_features


def label_classes(labels, n_classes: int) -> tuple[np.ndarray, np.ndarray]:
    """Class id per sample from equal-count contiguous groups of sorted labels.

    Group sizes differ by at most one, the earliest groups getting the
    remainder. Returns ``(class_ids, group_sizes)``.
    """
    labels = np.asarray(labels, dtype=float)
    n = len(labels)
    if n_classes < 1 or n_classes > n:
        raise SupervisedError(f"cannot split {n} labels into {n_classes} classes")
    base, extra = divmod(n, n_classes)
    sizes = np.full(n_classes, base)
    sizes[:extra] += 1
    order = np.argsort(labels, kind="stable")
    ids = np.empty(n, dtype=np.int64)
    ids[order] = np.repeat(np.arange(n_classes), sizes)
    return ids, sizes


def train_soft_estimator(Y, labels, n_classes: int, n_features: int | None = None,
                         shrinkage: float = DEFAULT_SHRINKAGE) -> SoftEstimatorModel:
    """Gaussian classes over equal-count label groups, for soft regression.

    Parameters
    ----------
    Y : (N, J') array of features; only the first ``n_features`` are used
    labels : (N,) real labels
    n_classes : number of contiguous label groups
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if n_features is not None:
        Y = Y[:, :n_features]
    labels = np.asarray(labels, dtype=float)
    if len(labels) != Y.shape[0]:
        raise SupervisedError(f"{len(labels)} labels for {Y.shape[0]} samples")
    ids, _ = label_classes(labels, n_classes)
    clf = train_gaussian_classifier(Y, ids, shrinkage, n_classes)
    reps = np.bincount(ids, weights=labels, minlength=n_classes) / np.bincount(ids, minlength=n_classes)
    edges = np.array([labels[ids == k].min() for k in range(n_classes)])
    return SoftEstimatorModel(clf, reps, edges)


def posteriors(m, Y) -> np.ndarray:
    clf = m.classifier if isinstance(m, SoftEstimatorModel) else m
    return clf.posteriors(_truncate(Y, clf.n_features))


def _truncate(Y, j: int) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[None, :]
    if Y.shape[1] < j:
        raise SupervisedError(f"model uses {j} features, got {Y.shape[1]}")
    return Y[:, :j]


def soft_estimate(m: SoftEstimatorModel, Y, rounding: str = "raw"):
    """Posterior-weighted mean of the representative labels.

    ``rounding="floor"`` keeps only the integer part, as done for ages in
    years; the default returns the real value. A 1-D ``Y`` is one sample.
    """
    if rounding not in ROUNDING_MODES:
        raise SupervisedError(f"unknown rounding mode {rounding!r}")
    single = np.asarray(Y).ndim == 1
    est = posteriors(m, Y) @ m.representative_labels
    # guard against round-off pushing the convex combination out of range
    est = np.clip(est, m.representative_labels.min(), m.representative_labels.max())
    if rounding == "floor":
        est = np.floor(est)
    return float(est[0]) if single else est


def classify(m, Y):
    """Most probable class id; a 1-D ``Y`` is one sample."""
    clf = m.classifier if isinstance(m, SoftEstimatorModel) else m
    single = np.asarray(Y).ndim == 1
    ids = clf.classify(_truncate(Y, clf.n_features))
    return int(ids[0]) if single else ids


def hard_estimate(m: SoftEstimatorModel, Y) -> np.ndarray:
    """Representative label of the most probable class."""
    return m.representative_labels[np.atleast_1d(classify(m, np.atleast_2d(Y)))]


# ---------------------------------------------------------------------------
# metrics

DEFAULT_CS_THRESHOLDS = tuple(float(k) for k in range(0, 11))


@dataclass(frozen=True)
class Metrics:
    mae: float
    rmse: float
    cs: dict[float, float]
    n: int

    def to_json(self) -> dict:
        return {"mae": self.mae, "rmse": self.rmse, "n": self.n,
                "cs": {repr(float(k)): v for k, v in sorted(self.cs.items())}}

    def cs_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["threshold", "cs"])
        for k, v in sorted(self.cs.items()):
            w.writerow([repr(float(k)), repr(float(v))])
        return buf.getvalue()


def evaluate(labels_true, labels_est, thresholds=DEFAULT_CS_THRESHOLDS) -> Metrics:
    t = np.asarray(labels_true, dtype=float).ravel()
    e = np.asarray(labels_est, dtype=float).ravel()
    if t.shape != e.shape:
        raise SupervisedError(f"{t.size} true labels but {e.size} estimates")
    if t.size == 0:
        raise SupervisedError("cannot evaluate an empty set")
    err = np.abs(e - t)
    cs = {float(k): float(np.mean(err <= k)) for k in thresholds}
    return Metrics(float(err.mean()), float(np.sqrt(np.mean(err * err))), cs, int(t.size))


def chance_level(labels_train, labels_test, thresholds=DEFAULT_CS_THRESHOLDS) -> dict:
    """Constant predictors: the training median (for MAE) and mean (for RMSE)."""
    train = np.asarray(labels_train, dtype=float)
    med = evaluate(labels_test, np.full(len(labels_test), np.median(train)), thresholds)
    mean = evaluate(labels_test, np.full(len(labels_test), train.mean()), thresholds)
    return {"mae": med.mae, "rmse": mean.rmse, "cs": med.cs, "n": med.n}
