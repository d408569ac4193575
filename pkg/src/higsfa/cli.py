"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from .datasets import DatasetBundle, generate
from .errors import ConfigError, NumericalError
from .expansions import ExpansionError
from .experiment import (METHODS, ExperimentConfig, features_used, graph_from_spec,
                         list_experiments, load_config, load_experiment_preset, network_for, run)
from .graphs import GraphError
from .hierarchy import e_rec, fit_global_reconstruction, list_presets, train_network
from .io import ModelBundle, atomic_write_text, load_dataset, load_model, save_dataset, save_model
from .supervised import (SoftEstimatorModel, evaluate, soft_estimate, train_gaussian_classifier,
                         train_soft_estimator)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def _config(args) -> ExperimentConfig:
    if args.config and args.preset:
        raise ConfigError("give either --config or --preset, not both")
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = load_experiment_preset(args.preset)
    else:
        raise ConfigError(f"need --config or --preset (presets: {', '.join(list_experiments())})")
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _dataset(args, cfg: ExperimentConfig | None = None) -> DatasetBundle:
    if getattr(args, "data", None):
        return load_dataset(args.data)
    cfg = cfg or _config(args)
    return generate(cfg.dataset["generator"], cfg.seed, **cfg.dataset.get("params", {}))


def _out(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def cmd_gen(args) -> int:
    cfg = _config(args)
    bundle = _dataset(args, cfg)
    path = _out(args) / f"{cfg.name}.hgsd"
    save_dataset(path, bundle)
    print(f"wrote {path} ({bundle.n_samples} x {bundle.input_dim})")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    bundle = _dataset(args, cfg)
    dr = bundle.subset("dr")
    s = bundle.subset("s") if bundle.mask("s").any() else dr
    g = graph_from_spec(cfg.graph, dr)
    net = train_network(network_for(cfg, args.method), dr.X, g, args.threads or cfg.threads)
    rec = fit_global_reconstruction(net.train_output, dr.X)
    estimators = {}
    sup = cfg.supervised or {}
    if sup:
        feats = net.extract(s.X)
        j = features_used(sup, args.method)
        if sup.get("label") is not None:
            estimators[sup["label"]] = train_soft_estimator(feats, s.labels[sup["label"]],
                                                           int(sup["n_classes"]), j)
        for name in sup.get("classify", []):
            _, ids = np.unique(s.labels[name], return_inverse=True)
            estimators[name] = train_gaussian_classifier(feats[:, :j], ids)
    info = {"config": cfg.name, "method": args.method, "seed": cfg.seed,
            "rounding": sup.get("rounding", "raw")}
    if "cs_thresholds" in sup:
        info["cs_thresholds"] = [float(k) for k in sup["cs_thresholds"]]
    path = _out(args) / f"model_{args.method}.hgsf"
    save_model(path, ModelBundle(net, rec, estimators, info))
    print(f"wrote {path}")
    return EXIT_OK


def _model_and_data(args) -> tuple[ModelBundle, DatasetBundle]:
    if not args.model or not args.data:
        raise ConfigError("need --model and --data")
    return load_model(args.model), load_dataset(args.data)


def cmd_extract(args) -> int:
    model, data = _model_and_data(args)
    Y = model.network.extract(data.X, args.threads or 1)
    path = _out(args) / "features.hgsd"
    save_dataset(path, DatasetBundle(f"{data.name}-features", Y, dict(data.labels),
                                     dict(data.label_kinds), {}, data.split))
    print(f"wrote {path} ({Y.shape[0]} x {Y.shape[1]})")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    model, data = _model_and_data(args)
    if model.reconstruction is None:
        raise ConfigError("model file has no reconstruction map")
    Y = model.network.extract(data.X, args.threads or 1)
    path = _out(args) / "reconstruction.hgsd"
    save_dataset(path, DatasetBundle(f"{data.name}-reconstruction", model.reconstruction.reconstruct(Y),
                                     dict(data.labels), dict(data.label_kinds), {}, data.split))
    print(_dump({"e_rec": e_rec(model.reconstruction, Y, data.X), "n": data.n_samples}), end="")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model, data = _model_and_data(args)
    test = data.subset("test") if data.mask("test").any() else data
    Y = model.network.extract(test.X, args.threads or 1)
    report = {"n": test.n_samples}
    if model.reconstruction is not None:
        report["e_rec"] = e_rec(model.reconstruction, Y, test.X)
    for name, est in sorted(model.estimators.items()):
        if name not in test.labels:
            raise ConfigError(f"dataset has no label column {name!r}")
        if isinstance(est, SoftEstimatorModel):
            y = soft_estimate(est, Y, model.info.get("rounding", "raw"))
            thresholds = model.info.get("cs_thresholds")
            m = evaluate(test.labels[name], y) if thresholds is None else evaluate(test.labels[name], y, thresholds)
            report[name] = m.to_json()
        else:
            _, ids = np.unique(test.labels[name], return_inverse=True)
            report[name] = {"classification_rate": float(np.mean(est.classify(Y[:, :est.n_features]) == ids))}
    text = _dump(report)
    if args.out:
        atomic_write_text(_out(args) / "evaluation.json", text)
    print(text, end="")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config(args)
    result = run(cfg, _out(args), args.threads)
    print(Path(result.files["summary"]).read_text(), end="")
    for key, path in sorted(result.files.items()):
        print(f"{key}: {path}")
    if args.save_models:
        for method, model in result.models.items():
            save_model(_out(args) / f"model_{method}.hgsf", model)
    return EXIT_OK


def cmd_inspect(args) -> int:
    if not args.model:
        raise ConfigError("need --model")
    model = load_model(args.model)
    net = model.network
    layers = []
    for k, (layer, plan, nodes) in enumerate(zip(net.spec.layers, net.plans, net.nodes), start=1):
        slow = [getattr(n.model, "n_slow", n.model.output_dim) for n in nodes]
        layers.append({"layer": k, "grid": list(plan.grid_shape), "fan_in": list(layer.fan_in),
                       "stride": list(layer.stride), "node_kind": layer.node_kind,
                       "input_dim": nodes[0].model.input_dim if layer.pre_pca_dim is None else plan.inputs.shape[1],
                       "output_dim": layer.output_dim, "slow_features": {"min": min(slow), "max": max(slow)}})
    print(_dump({"network": net.spec.name, "input_shape": list(net.spec.input_shape),
                 "layers": layers, "reconstruction": model.reconstruction is not None,
                 "estimators": sorted(model.estimators), "info": model.info}), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="higsfa", description="Hierarchical information-preserving graph-based SFA.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True, data=False, model=False):
        if config:
            sp.add_argument("--config", help="experiment config JSON")
            sp.add_argument("--preset", help=f"experiment preset ({', '.join(list_experiments())})")
            sp.add_argument("--seed", type=int, help="override the config seed (unsigned 64-bit)")
        if data:
            sp.add_argument("--data", help="dataset file (.hgsd)")
        if model:
            sp.add_argument("--model", help="model file (.hgsf)")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--threads", type=int, default=None, help="worker threads per layer")

    common(sub.add_parser("gen", help="generate a synthetic dataset"))
    sp = sub.add_parser("train", help="train one network and its supervised stages")
    common(sp, data=True)
    sp.add_argument("--method", choices=[m for m in METHODS if m != "pca"], default="higsfa")
    common(sub.add_parser("extract", help="features of a dataset"), config=False, data=True, model=True)
    common(sub.add_parser("reconstruct", help="linear reconstruction and e_rec"), config=False, data=True, model=True)
    common(sub.add_parser("evaluate", help="metrics on the test split"), config=False, data=True, model=True)
    sp = sub.add_parser("run", help="full experiment with reports")
    common(sp)
    sp.add_argument("--save-models", action="store_true", help="also write the trained models")
    sp = sub.add_parser("inspect-model", help="summarize a model file")
    sp.add_argument("--model", help="model file (.hgsf)")
    sub.add_parser("presets", help="list network and experiment presets")
    return p


def _presets(args) -> int:
    print("networks:    " + " ".join(list_presets()))
    print("experiments: " + " ".join(list_experiments()))
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "extract": cmd_extract, "reconstruct": cmd_reconstruct,
            "evaluate": cmd_evaluate, "run": cmd_run, "inspect-model": cmd_inspect, "presets": _presets}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 2 ** 64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return COMMANDS[args.command](args)
    except (ConfigError, GraphError, ExpansionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
