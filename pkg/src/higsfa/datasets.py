"""Synthetic dataset generators with stored ground-truth latents.

Every generator draws from its own PCG64 stream seeded by
``SeedSequence([seed, crc32(generator name)])``, so changing one generator
never perturbs another and a ``(name, params, seed)`` triple always yields
the same bits on any platform.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import ConfigError

__all__ = [
    "SPLITS",
    "DatasetBundle",
    "rng_for",
    "gen_toy_infoloss",
    "gen_latent_regression",
    "gen_multilabel",
    "GENERATORS",
    "generate",
]

SPLITS = ("dr", "s", "test")


def rng_for(name: str, seed: int) -> np.random.Generator:
    if seed is None or int(seed) < 0:
        raise ConfigError("generators need a non-negative integer seed")
    ss = np.random.SeedSequence([int(seed), zlib.crc32(name.encode())])
    return np.random.Generator(np.random.PCG64(ss))


@dataclass
class DatasetBundle:
    """Samples, labels, optional latents and a DR/S/test split tag per row."""

    name: str
    X: np.ndarray
    labels: dict[str, np.ndarray]
    label_kinds: dict[str, str]  # "numeric" or "categorical"
    latents: dict[str, np.ndarray] = field(default_factory=dict)
    split: np.ndarray | None = None  # int codes into SPLITS
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        n = self.X.shape[0]
        if self.split is None:
            self.split = np.zeros(n, dtype=np.int64)
        self.split = np.asarray(self.split, dtype=np.int64)
        for kind, cols in (("label", self.labels), ("latent", self.latents)):
            for key, col in cols.items():
                if len(col) != n:
                    raise ConfigError(f"{kind} {key!r} has {len(col)} rows, X has {n}")
        if len(self.split) != n or np.any((self.split < 0) | (self.split >= len(SPLITS))):
            raise ConfigError("split tags must give one of dr/s/test per row")

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def input_dim(self) -> int:
        return self.X.shape[1]

    def mask(self, split: str) -> np.ndarray:
        return self.split == SPLITS.index(split)

    def subset(self, split: str | np.ndarray) -> "DatasetBundle":
        idx = self.mask(split) if isinstance(split, str) else np.asarray(split)
        return DatasetBundle(self.name, self.X[idx],
                             {k: v[idx] for k, v in self.labels.items()}, dict(self.label_kinds),
                             {k: v[idx] for k, v in self.latents.items()}, self.split[idx],
                             dict(self.params))


def _split_tags(n: int, fractions, rng, contiguous: bool) -> np.ndarray:
    fractions = np.asarray(fractions, dtype=float)
    if fractions.shape != (3,) or np.any(fractions < 0) or not np.isclose(fractions.sum(), 1.0):
        raise ConfigError("split fractions must be three non-negative numbers summing to 1")
    counts = np.floor(fractions * n).astype(int)
    counts[0] += n - counts.sum()
    tags = np.repeat(np.arange(3), counts)
    if not contiguous:
        tags = tags[rng.permutation(n)]
    return tags


def _binary_chain(n: int, p: float, rng) -> np.ndarray:
    """+-1 Markov chain flipping sign with probability p, uniform start."""
    flips = rng.random(n) < p
    flips[0] = False
    start = 1.0 if rng.random() < 0.5 else -1.0
    return start * np.where(np.cumsum(flips) % 2 == 0, 1.0, -1.0)


def gen_toy_infoloss(n: int, flip_probs=(0.05, 0.1, 0.2, 0.5), seed: int = 0,
                     split_fractions=(1.0, 0.0, 0.0)) -> DatasetBundle:
    """Four-channel toy where the slowest signal is hidden in a product.

    Four independent +-1 chains ``s1, s2, s3, n`` with flip probabilities
    ``flip_probs`` (delta value ``4 p`` each) are observed as
    ``(s2, s1 * n, s3, n)``. The slowest signal ``s1`` is only visible by
    multiplying components that sit in different halves of the input.
    """
    probs = tuple(float(p) for p in flip_probs)
    if len(probs) != 4 or any(not 0 < p <= 0.5 for p in probs):
        raise ConfigError("flip_probs must be four numbers in (0, 0.5]")
    if n < 3:
        raise ConfigError("need at least 3 samples")
    rng = rng_for("toy_infoloss", seed)
    s1, s2, s3, noise = (_binary_chain(n, p, rng) for p in probs)
    X = np.column_stack([s2, s1 * noise, s3, noise])
    t = np.arange(n, dtype=float)
    return DatasetBundle("toy_infoloss", X, {"t": t}, {"t": "numeric"},
                         {"s1": s1, "s2": s2, "s3": s3, "n": noise},
                         _split_tags(n, split_fractions, rng, contiguous=True),
                         {"n": n, "flip_probs": list(probs), "seed": int(seed)})


def _drifting_reflected_walk(n: int, rng, drift: float, jitter: float) -> np.ndarray:
    """Bounded smooth walk on [0, 1] whose marginal is close to uniform.

    A phase advancing by ``drift`` (plus small positive jitter) is folded
    into [0, 1] by reflection, so the walk sweeps the interval back and forth
    at a nearly constant speed.
    """
    steps = drift * (1.0 + jitter * rng.standard_normal(n))
    phase = rng.random() * 2.0 + np.cumsum(np.abs(steps))
    folded = np.mod(phase, 2.0)
    return np.where(folded > 1.0, 2.0 - folded, folded)


def gen_latent_regression(n: int, input_dim: int = 64, noise: float = 0.1, seed: int = 0,
                          mixing: str = "nonlinear", distractor_scale: float = 3.0,
                          split_fractions=(0.5, 0.25, 0.25)) -> DatasetBundle:
    """Regression task with one slow label hidden among loud distractors.

    The label ``theta`` is a bounded random walk on [0, 1]; ``t = 2 theta - 1``.

    ``mixing="linear"`` observes ``A [t, t**2 - 1/3, d] + noise`` for a fixed
    random full-rank ``A`` and Gaussian distractors ``d``.

    ``mixing="nonlinear"`` splits the components into carriers and
    modulated components, alternating in pairs (component ``k`` is a carrier
    when bit 1 of ``k`` is clear). Carrier ``k`` holds a loud +-1 distractor
    ``s e_k`` plus a small ``t**2`` term; its partner ``k ^ 2`` holds
    ``m_k t e_k``. The sign of ``t`` is therefore recoverable only from
    products of components two places apart, which on an 8x8 grid never share
    a 2x2 patch but always share a 4x4 block. The distractors dominate the
    variance, which hides the label from PCA.
    """
    if input_dim < 4:
        raise ConfigError("input_dim must be at least 4")
    if n < 2 or noise < 0:
        raise ConfigError("need n >= 2 and noise >= 0")
    if mixing not in ("linear", "nonlinear"):
        raise ConfigError(f"unknown mixing {mixing!r}")
    if mixing == "nonlinear" and input_dim % 4:
        raise ConfigError("nonlinear mixing needs input_dim divisible by 4")
    rng = rng_for("latent_regression", seed)
    theta = _drifting_reflected_walk(n, rng, drift=0.05, jitter=0.5)
    t = 2.0 * theta - 1.0
    t2 = t * t - 1.0 / 3.0
    if mixing == "linear":
        k = max(input_dim - 2, 1)
        d = rng.standard_normal((n, k))
        A = rng.standard_normal((input_dim, k + 2))
        X = np.column_stack([t, t2, distractor_scale * d]) @ A.T
    else:
        k = np.arange(input_dim)
        carriers = k[(k & 2) == 0]
        d = np.where(rng.random((n, len(carriers))) < 0.5, -1.0, 1.0)
        X = np.empty((n, input_dim))
        quad = 0.5 * rng.standard_normal(len(carriers))
        mod = 1.0 + rng.random(len(carriers))
        X[:, carriers] = distractor_scale * d + t2[:, None] * quad
        X[:, carriers ^ 2] = mod * t[:, None] * d
    X = X + noise * rng.standard_normal(X.shape)
    return DatasetBundle("latent_regression", X, {"theta": theta}, {"theta": "numeric"},
                         {"theta": theta, "distractors": d},
                         _split_tags(n, split_fractions, rng, contiguous=False),
                         {"n": n, "input_dim": input_dim, "noise": noise, "seed": int(seed),
                          "mixing": mixing, "distractor_scale": distractor_scale})


def gen_multilabel(n: int, seed: int = 0, input_dim: int = 16, noise: float = 0.2,
                   split_fractions=(0.5, 0.25, 0.25)) -> DatasetBundle:
    """One numeric and two balanced binary labels with independent causes.

    Observations rotate ``(t, b1, b2)`` and ``input_dim - 3`` Gaussian
    distractors by a fixed random orthogonal matrix and add Gaussian noise.
    The rotation keeps the noise on every latent at ``noise``, so recovery
    quality does not depend on the seed. Each binary label has exactly
    ``n // 2`` positives.
    """
    if input_dim < 4:
        raise ConfigError("input_dim must be at least 4")
    if n < 4:
        raise ConfigError("need at least 4 samples")
    rng = rng_for("multilabel", seed)
    theta = rng.random(n)
    b1 = (rng.permutation(n) < n // 2).astype(float)
    b2 = (rng.permutation(n) < n // 2).astype(float)
    d = rng.standard_normal((n, input_dim - 3))
    A = stats.ortho_group.rvs(input_dim, random_state=rng)
    Z = np.column_stack([2.0 * theta - 1.0, 2.0 * b1 - 1.0, 2.0 * b2 - 1.0, d])
    X = Z @ A.T + noise * rng.standard_normal((n, input_dim))
    return DatasetBundle("multilabel", X, {"theta": theta, "b1": b1, "b2": b2},
                         {"theta": "numeric", "b1": "categorical", "b2": "categorical"},
                         {"distractors": d},
                         _split_tags(n, split_fractions, rng, contiguous=False),
                         {"n": n, "seed": int(seed), "input_dim": input_dim, "noise": noise})


GENERATORS = {
    "toy_infoloss": gen_toy_infoloss,
    "latent_regression": gen_latent_regression,
    "multilabel": gen_multilabel,
}


def generate(generator: str, seed: int, **params) -> DatasetBundle:
    if generator not in GENERATORS:
        raise ConfigError(f"unknown generator {generator!r}; choose from {sorted(GENERATORS)}")
    try:
        return GENERATORS[generator](seed=seed, **params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {generator}: {exc}") from exc
