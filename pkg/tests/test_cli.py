import json
import subprocess
import sys
from pathlib import Path

import pytest

from higsfa.cli import main
from higsfa.errors import ConfigError
from higsfa.experiment import (EXPERIMENT_DIR, ExperimentConfig, list_experiments,
                               load_experiment_preset, run)

pytestmark = pytest.mark.filterwarnings("ignore::higsfa.node.NodeWarning",
                                        "ignore::higsfa.graphs.GraphWarning")


def _small_config(tmp_path, n=1200):
    d = json.loads((EXPERIMENT_DIR / "multilabel.json").read_text())
    d["dataset"]["params"]["n"] = n
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(d))
    return path, d


def test_shipped_experiment_presets_load():
    assert set(list_experiments()) >= {"toy_infoloss", "latent64", "multilabel"}
    for name in list_experiments():
        assert isinstance(load_experiment_preset(name), ExperimentConfig)


def test_config_validation():
    with pytest.raises(ConfigError, match="unknown config keys"):
        ExperimentConfig.from_json({"seed": 1, "dataset": {"generator": "x"}, "graph": {}, "colour": 1})
    with pytest.raises(ConfigError, match="seed"):
        ExperimentConfig.from_json({"dataset": {"generator": "x"}, "graph": {}})
    with pytest.raises(ConfigError, match="unknown network preset"):
        ExperimentConfig.from_json({"seed": 1, "dataset": {"generator": "multilabel"},
                                    "graph": {"type": "linear"}, "network": "nope"})


def test_reports_are_byte_identical_across_reruns(tmp_path):
    _, d = _small_config(tmp_path)
    a = run(d, tmp_path / "a")
    b = run(d, tmp_path / "b")
    for key, path in a.files.items():
        assert Path(path).read_bytes() == Path(b.files[key]).read_bytes(), key
    other = run(d, tmp_path / "c", seed=d["seed"] + 1)
    assert other.metrics != a.metrics


def test_run_reports_pca_columns(tmp_path):
    _, d = _small_config(tmp_path)
    res = run(d, tmp_path)
    assert set(res.metrics["methods"]) == {"higsfa", "hgsfa", "pca"}
    pca = res.metrics["methods"]["pca"]
    assert "mae" in pca["regression"] and "test" in pca["e_rec"]
    assert "pca" in (tmp_path / "e_rec.txt").read_text()
    for name in ("metrics.json", "deltas.csv", "cs.csv", "summary.txt"):
        assert (tmp_path / name).exists()


def test_cli_pipeline(tmp_path, capsys):
    cfg, _ = _small_config(tmp_path)
    out = tmp_path / "out"
    assert main(["gen", "--config", str(cfg), "--out", str(out)]) == 0
    data = out / "multilabel.hgsd"
    assert main(["train", "--config", str(cfg), "--data", str(data), "--out", str(out)]) == 0
    model = out / "model_higsfa.hgsf"
    assert main(["extract", "--model", str(model), "--data", str(data), "--out", str(out)]) == 0
    assert main(["reconstruct", "--model", str(model), "--data", str(data), "--out", str(out)]) == 0
    capsys.readouterr()
    assert main(["evaluate", "--model", str(model), "--data", str(data), "--out", str(out)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["b1"]["classification_rate"] > 0.9
    assert report["theta"]["mae"] < 0.2
    assert main(["inspect-model", "--model", str(model)]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["layers"][0]["node_kind"] == "igsfa"
    assert main(["presets"]) == 0
    assert "latent64_higsfa" in capsys.readouterr().out


def test_exit_codes(tmp_path):
    assert main(["run", "--preset", "nope"]) == 2
    assert main(["run"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["run", "--config", str(bad)]) == 2
    assert main(["inspect-model", "--model", str(tmp_path / "missing.hgsf")]) == 4
    (tmp_path / "short.hgsf").write_bytes(b"HGSF\x01")
    assert main(["inspect-model", "--model", str(tmp_path / "short.hgsf")]) == 4
    assert main(["gen", "--preset", "multilabel", "--seed", "-1"]) == 2
    cfg, d = _small_config(tmp_path)
    d["dataset"]["params"]["n"] = 80
    cfg.write_text(json.dumps(d))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "higsfa", "presets"], capture_output=True, text=True)
    assert out.returncode == 0 and "toy_infoloss" in out.stdout
