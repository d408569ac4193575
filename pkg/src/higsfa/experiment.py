"""Experiment configs and the end-to-end pipeline behind ``higsfa run``.

A config is a JSON object::

    {
      "name": "latent64",
      "seed": 7,
      "dataset": {"generator": "latent_regression", "params": {"n": 20000}},
      "network": {"preset": "latent64_higsfa"},
      "networks": {"hgsfa": {"preset": "latent64_hgsfa"}},
      "graph": {"type": "serial", "label_column": "theta", "groups": 20},
      "supervised": {"label": "theta", "n_classes": 20, "features_used": 4,
                     "rounding": "raw", "classify": []},
      "baselines": {"higsfa": true, "hgsfa": true, "pca": true},
      "outputs": {"reconstructions": false},
      "threads": 1
    }

``network`` is a preset reference or an inline network object. The HiGSFA
and HGSFA networks default to that spec with every node switched to iGSFA or
GSFA; ``networks`` overrides either one. ``features_used`` may be a single
count or a per-method mapping. The DR split trains the networks and
the reconstruction maps, the S split trains the supervised step, and the
test split is evaluated. Empty splits fall back to DR.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datasets import DatasetBundle, generate
from .errors import ConfigError
from .graphs import TrainingGraph, clustered_graph, combine_graphs, linear_graph, serial_graph
from .gsfa import delta_of, train_pca
from .hierarchy import (NetworkSpec, e_rec,
                        fit_global_reconstruction, load_preset, train_network)
from .io import ModelBundle, atomic_write_text, save_dataset
from .supervised import (chance_level, evaluate, hard_estimate, soft_estimate,
                         train_gaussian_classifier, train_soft_estimator)

__all__ = [
    "METHODS",
    "ExperimentConfig",
    "load_config",
    "load_experiment_preset",
    "list_experiments",
    "graph_from_spec",
    "network_for",
    "features_used",
    "train_method",
    "run",
    "RunResult",
]

METHODS = ("higsfa", "hgsfa", "pca")
_CONFIG_KEYS = {"name", "seed", "dataset", "network", "networks", "graph", "supervised",
                "baselines", "outputs", "threads", "description"}


@dataclass
class ExperimentConfig:
    name: str
    seed: int
    dataset: dict
    graph: dict
    network: dict | None = None
    networks: dict = field(default_factory=dict)
    supervised: dict | None = None
    baselines: dict = field(default_factory=lambda: {m: True for m in METHODS})
    outputs: dict = field(default_factory=dict)
    threads: int = 1

    @classmethod
    def from_json(cls, d: dict) -> "ExperimentConfig":
        unknown = set(d) - _CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        for key in ("seed", "dataset", "graph"):
            if key not in d:
                raise ConfigError(f"config is missing {key!r}")
        if not isinstance(d["seed"], int) or d["seed"] < 0:
            raise ConfigError("seed must be a non-negative integer")
        if "generator" not in d["dataset"]:
            raise ConfigError("dataset needs a 'generator'")
        base = {m: False for m in METHODS}
        base.update(d.get("baselines", {m: True for m in METHODS}))
        if set(base) - set(METHODS):
            raise ConfigError(f"unknown baselines {sorted(set(base) - set(METHODS))}")
        cfg = cls(d.get("name", "experiment"), d["seed"], d["dataset"], d["graph"],
                  d.get("network"), d.get("networks", {}), d.get("supervised"), base,
                  d.get("outputs", {}), int(d.get("threads", 1)))
        for method in ("higsfa", "hgsfa"):
            if cfg.baselines[method]:
                network_for(cfg, method)  # resolves presets early
        return cfg


EXPERIMENT_DIR = Path(__file__).with_name("presets") / "experiments"


def list_experiments() -> list[str]:
    return sorted(p.stem for p in EXPERIMENT_DIR.glob("*.json"))


def load_experiment_preset(name: str) -> ExperimentConfig:
    path = EXPERIMENT_DIR / f"{name}.json"
    if not path.exists():
        raise ConfigError(f"unknown experiment preset {name!r}; available: {', '.join(list_experiments())}")
    return load_config(path)


def load_config(path) -> ExperimentConfig:
    try:
        return ExperimentConfig.from_json(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def _network_spec(obj) -> NetworkSpec:
    if isinstance(obj, str):
        return load_preset(obj)
    if isinstance(obj, dict) and "preset" in obj:
        return load_preset(obj["preset"])
    if isinstance(obj, dict):
        try:
            return NetworkSpec.from_json(obj)
        except KeyError as exc:
            raise ConfigError(f"network spec is missing {exc}") from exc
    raise ConfigError("network must be a preset name or a network object")


def network_for(cfg: ExperimentConfig, method: str) -> NetworkSpec:
    if method in cfg.networks:
        return _network_spec(cfg.networks[method])
    if cfg.network is None:
        raise ConfigError(f"no network given for {method}")
    kind = "igsfa" if method == "higsfa" else "gsfa"
    spec = _network_spec(cfg.network)
    return spec.with_kind(kind, f"{spec.name}-{method}")


def graph_from_spec(spec: dict, bundle: DatasetBundle) -> TrainingGraph:
    """Training graph over the rows of ``bundle`` from a JSON graph spec."""
    kind = spec.get("type")

    def column(name):
        if name not in bundle.labels:
            raise ConfigError(f"graph refers to unknown label column {name!r}")
        return bundle.labels[name]

    if kind == "linear":
        return linear_graph(bundle.n_samples)
    if kind == "clustered":
        return clustered_graph(column(spec["label_column"]))
    if kind == "serial":
        return serial_graph(column(spec["label_column"]), int(spec["groups"]))[0]
    if kind == "combined":
        parts = [graph_from_spec(p, bundle) for p in spec.get("parts", [])]
        if not parts:
            raise ConfigError("combined graph needs parts")
        if spec.get("balance", False):
            # every part contributes the same total edge weight
            parts = [p.scaled(1.0 / p.edge_normalizer, 1.0) for p in parts]
        return combine_graphs(parts)
    raise ConfigError(f"unknown graph type {kind!r}")


def features_used(sup: dict, method: str, default: int = 4) -> int:
    """Number of leading features the supervised step reads for ``method``."""
    j = sup.get("features_used", default)
    return int(j.get(method, default) if isinstance(j, dict) else j)


def train_method(method: str, cfg: ExperimentConfig, dr: DatasetBundle, g: TrainingGraph,
                 threads: int = 1, output_dim: int | None = None):
    """Train one feature extractor on the DR split; returns (extract fn, network, pca)."""
    if method == "pca":
        pca = train_pca(dr.X, output_dim)
        return pca.apply, None, pca
    net = train_network(network_for(cfg, method), dr.X, g, threads)
    return (lambda X: net.extract(X, threads)), net, None


@dataclass
class RunResult:
    metrics: dict
    files: dict[str, str]
    models: dict[str, ModelBundle]


def _splits(bundle: DatasetBundle) -> dict[str, DatasetBundle]:
    out = {"dr": bundle.subset("dr")}
    for name in ("s", "test"):
        part = bundle.subset(name)
        out[name] = part if part.n_samples else out["dr"]
    return out


def _corr(a, b) -> float:
    a = a - a.mean()
    b = b - b.mean()
    den = np.sqrt(np.sum(a * a) * np.sum(b * b))
    return float(np.sum(a * b) / den) if den > 0 else 0.0


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _table(rows, header) -> str:
    cells = [header] + [[_fmt(c) for c in r] for r in rows]
    widths = [max(len(r[k]) for r in cells) for k in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    return f"{v:.6g}" if isinstance(v, float) else str(v)


def run(cfg: ExperimentConfig | dict, out_dir=None, threads: int | None = None,
        seed: int | None = None) -> RunResult:
    """Full pipeline; writes reports to ``out_dir`` if given."""
    if isinstance(cfg, dict):
        cfg = ExperimentConfig.from_json(cfg)
    if seed is not None:
        cfg.seed = int(seed)
    threads = cfg.threads if threads is None else threads
    bundle = generate(cfg.dataset["generator"], cfg.seed, **cfg.dataset.get("params", {}))
    splits = _splits(bundle)
    dr = splits["dr"]
    g = graph_from_spec(cfg.graph, dr)
    sup = cfg.supervised

    metrics: dict = {"name": cfg.name, "seed": cfg.seed,
                     "dataset": {"generator": cfg.dataset["generator"], "params": bundle.params,
                                 "rows": {k: int(bundle.mask(k).sum()) for k in ("dr", "s", "test")}},
                     "graph": {"type": cfg.graph.get("type"), "edge_normalizer": g.edge_normalizer,
                               "vertex_normalizer": g.vertex_normalizer},
                     "methods": {}}
    delta_rows, erec_rows, cs_rows, corr_rows = [], [], [], []
    models: dict[str, ModelBundle] = {}
    files: dict[str, str] = {}
    dims = {}
    order = [m for m in ("higsfa", "hgsfa", "pca") if cfg.baselines.get(m)]
    if not order:
        raise ConfigError("every method is switched off")
    for method in order:
        if method == "pca":
            dims["pca"] = _pca_dim(cfg, dims)
        extract, net, pca = train_method(method, cfg, dr, g, threads, dims.get(method))
        feats = {"dr": net.train_output if net is not None else extract(dr.X)}
        for name in ("s", "test"):
            feats[name] = extract(splits[name].X)
        dims[method] = feats["dr"].shape[1]
        rec = fit_global_reconstruction(feats["dr"], dr.X)
        report = delta_of(feats["dr"], g)
        entry = {"output_dim": dims[method],
                 "deltas": [float(d) for d in report.deltas],
                 "e_rec": {"dr": e_rec(rec, feats["dr"], dr.X),
                           "test": e_rec(rec, feats["test"], splits["test"].X)}}
        for j, d in enumerate(report.deltas):
            delta_rows.append([method, j + 1, repr(float(d))])
        erec_rows.append([method, dims[method], entry["e_rec"]["dr"], entry["e_rec"]["test"]])
        for name, lat in sorted(bundle.latents.items()):
            lat_dr = np.asarray(lat)[bundle.mask("dr")]
            if lat_dr.ndim == 1:
                rho = _corr(feats["dr"][:, 0], lat_dr)
                entry.setdefault("top_feature_correlation", {})[name] = rho
                corr_rows.append([method, name, repr(abs(rho))])

        estimators = {}
        if sup:
            j = features_used(sup, method)
            s_set, test = splits["s"], splits["test"]
            label = sup.get("label")
            if label is not None:
                est = train_soft_estimator(feats["s"], s_set.labels[label], int(sup["n_classes"]), j)
                y_est = soft_estimate(est, feats["test"], sup.get("rounding", "raw"))
                m = evaluate(test.labels[label], y_est, sup.get("cs_thresholds", _default_thresholds(bundle.labels[label])))
                hard = evaluate(test.labels[label], hard_estimate(est, feats["test"]))
                entry["regression"] = m.to_json()
                entry["regression"]["hard_mae"] = hard.mae
                entry["regression"]["rho"] = _corr(y_est, test.labels[label])
                for k, v in sorted(m.cs.items()):
                    cs_rows.append([method, repr(k), repr(v)])
                estimators[label] = est
            for name in sup.get("classify", []):
                clf = train_gaussian_classifier(feats["s"][:, :j], _class_ids(s_set.labels[name]))
                pred = clf.classify(feats["test"][:, :j])
                rate = float(np.mean(pred == _class_ids(test.labels[name])))
                entry.setdefault("classification", {})[name] = rate
                estimators[name] = clf
        metrics["methods"][method] = entry
        if net is not None:
            models[method] = ModelBundle(net, rec, estimators,
                                         {"config": cfg.name, "method": method, "seed": cfg.seed})
        if out_dir is not None and cfg.outputs.get("reconstructions"):
            files[f"reconstruction_{method}"] = str(Path(out_dir) / f"reconstruction_{method}.hgsd")
            save_dataset(files[f"reconstruction_{method}"],
                         DatasetBundle(f"{bundle.name}-reconstruction-{method}",
                                       rec.reconstruct(feats["test"]), dict(splits["test"].labels),
                                       dict(bundle.label_kinds)))

    if sup and sup.get("label") is not None:
        lab = sup["label"]
        metrics["chance"] = chance_level(splits["s"].labels[lab], splits["test"].labels[lab],
                                         sup.get("cs_thresholds", _default_thresholds(bundle.labels[lab])))
    erec_rows.append(["chance", 0, 1.0, 1.0])
    metrics["e_rec_table"] = [{"method": r[0], "output_dim": r[1], "dr": r[2], "test": r[3]}
                              for r in erec_rows]

    if out_dir is not None:
        out = Path(out_dir)
        files["metrics"] = str(out / "metrics.json")
        atomic_write_text(out / "metrics.json", json.dumps(_plain(metrics), sort_keys=True, indent=2) + "\n")
        files["deltas"] = str(out / "deltas.csv")
        atomic_write_text(out / "deltas.csv", _csv(delta_rows, ["method", "feature", "delta"]))
        files["e_rec"] = str(out / "e_rec.txt")
        atomic_write_text(out / "e_rec.txt", _table(erec_rows, ["method", "output_dim", "e_rec_dr", "e_rec_test"]))
        if cs_rows:
            files["cs"] = str(out / "cs.csv")
            atomic_write_text(out / "cs.csv", _csv(cs_rows, ["method", "threshold", "cs"]))
        if corr_rows:
            files["correlations"] = str(out / "correlations.csv")
            atomic_write_text(out / "correlations.csv", _csv(corr_rows, ["method", "latent", "abs_rho_top_feature"]))
        files["summary"] = str(out / "summary.txt")
        atomic_write_text(out / "summary.txt", summary_table(metrics))
    return RunResult(metrics, files, models)


def _pca_dim(cfg: ExperimentConfig, dims: dict) -> int:
    """PCA baseline output dimension, matched to the networks."""
    for m in ("higsfa", "hgsfa"):
        if m in dims:
            return dims[m]
    if cfg.network is not None or "higsfa" in cfg.networks:
        return network_for(cfg, "higsfa").layers[-1].output_dim
    raise ConfigError("the PCA baseline needs a network to match its output dim")


def _default_thresholds(labels) -> tuple[float, ...]:
    span = float(np.max(labels) - np.min(labels)) if len(labels) else 1.0
    step = span / 20.0 if span > 0 else 1.0
    return tuple(round(k * step, 12) for k in range(21))


def _class_ids(values) -> np.ndarray:
    _, ids = np.unique(np.asarray(values), return_inverse=True)
    return ids


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def summary_table(metrics: dict) -> str:
    rows = []
    for method, e in metrics["methods"].items():
        reg = e.get("regression", {})
        rows.append([method, e["output_dim"], e["deltas"][0] if e["deltas"] else float("nan"),
                     e["e_rec"]["test"], reg.get("mae", "-"), reg.get("rmse", "-")])
    if "chance" in metrics:
        rows.append(["chance", 0, "-", 1.0, metrics["chance"]["mae"], metrics["chance"]["rmse"]])
    return _table(rows, ["method", "dim", "delta_1", "e_rec_test", "mae", "rmse"])
