"""Nonlinear expansions applied inside a node before linear GSFA.

An expansion is an ordered list of terms, each acting on a contiguous slice
of the input components. Term kinds:

``identity``  the slice itself
``qt``        products ``x_i * x_j`` for ``i <= j`` (upper triangle, row major)
``qn``        ``qt`` divided by ``1 + ||x_slice||**2``
``e08``       ``|x_i| ** 0.8``
``max2``      ``max(x_i, x_{i+1})`` over neighbouring components

The JSON form mirrors the layer configs, e.g.
``[{"term": "identity", "to": 18}, {"term": "qt", "to": 10}]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ExpansionError", "Term", "ExpansionSpec", "expand", "expanded_dim"]

TERM_KINDS = ("identity", "qt", "qn", "e08", "max2")


class ExpansionError(ValueError):
    pass


@dataclass(frozen=True)
class Term:
    kind: str
    start: int = 0
    stop: int | None = None  # None: up to the last input component

    def __post_init__(self):
        if self.kind not in TERM_KINDS:
            raise ExpansionError(f"unknown expansion term {self.kind!r}")
        if self.start < 0 or (self.stop is not None and self.stop < self.start):
            raise ExpansionError(f"invalid range [{self.start}, {self.stop}) for {self.kind}")

    def bounds(self, input_dim: int) -> tuple[int, int]:
        stop = input_dim if self.stop is None else self.stop
        if stop > input_dim:
            raise ExpansionError(f"{self.kind} term reads components up to {stop} "
                                 f"but the input has only {input_dim}")
        return self.start, stop

    def size(self, input_dim: int) -> int:
        a, b = self.bounds(input_dim)
        k = b - a
        if self.kind in ("identity", "e08"):
            return k
        if self.kind in ("qt", "qn"):
            return k * (k + 1) // 2
        return max(k - 1, 0)

    def apply(self, X: np.ndarray) -> np.ndarray:
        a, b = self.bounds(X.shape[1])
        x = X[:, a:b]
        if self.kind == "identity":
            return x
        if self.kind == "e08":
            return np.abs(x) ** 0.8
        if self.kind == "max2":
            return np.maximum(x[:, :-1], x[:, 1:])
        i, j = np.triu_indices(x.shape[1])
        prod = x[:, i] * x[:, j]
        if self.kind == "qn":
            prod = prod / (1.0 + np.sum(x * x, axis=1, keepdims=True))
        return prod

    def to_json(self) -> dict:
        d = {"term": self.kind}
        if self.start:
            d["from"] = self.start
        if self.stop is not None:
            d["to"] = self.stop
        return d


@dataclass(frozen=True)
class ExpansionSpec:
    terms: tuple[Term, ...] = (Term("identity"),)

    @classmethod
    def identity(cls) -> "ExpansionSpec":
        return cls((Term("identity"),))

    @classmethod
    def quadratic(cls) -> "ExpansionSpec":
        """Linear plus all quadratic terms, ``k (k + 3) / 2`` outputs."""
        return cls((Term("identity"), Term("qt")))

    @classmethod
    def from_json(cls, obj) -> "ExpansionSpec":
        if obj is None:
            return cls.identity()
        if isinstance(obj, str):
            presets = {"identity": cls.identity(), "quadratic": cls.quadratic()}
            if obj not in presets:
                raise ExpansionError(f"unknown expansion preset {obj!r}")
            return presets[obj]
        terms = []
        for item in obj:
            terms.append(Term(item["term"], int(item.get("from", 0)),
                              None if item.get("to") is None else int(item["to"])))
        if not terms:
            raise ExpansionError("an expansion needs at least one term")
        return cls(tuple(terms))

    def to_json(self) -> list:
        return [t.to_json() for t in self.terms]

    def output_dim(self, input_dim: int) -> int:
        return sum(t.size(input_dim) for t in self.terms)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return expand(self, X)


def expand(spec: ExpansionSpec, x) -> np.ndarray:
    """Concatenate the term outputs for one sample (1-D) or a batch (rows)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    parts = [t.apply(X) for t in spec.terms]
    out = np.concatenate(parts, axis=1) if parts else np.zeros((X.shape[0], 0))
    return out[0] if single else out


def expanded_dim(spec: ExpansionSpec, input_dim: int) -> int:
    return spec.output_dim(input_dim)
