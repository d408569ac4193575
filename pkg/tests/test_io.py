import struct

import numpy as np
import pytest

from higsfa.datasets import gen_multilabel
from higsfa.errors import FormatError
from higsfa.expansions import ExpansionSpec
from higsfa.graphs import serial_graph
from higsfa.hierarchy import LayerSpec, NetworkSpec, fit_global_reconstruction, train_network
from higsfa.io import (ModelBundle, load_dataset, load_model, read_container, save_dataset, save_model,
                       write_container)
from higsfa.supervised import train_gaussian_classifier, train_soft_estimator

pytestmark = pytest.mark.filterwarnings("ignore::higsfa.node.NodeWarning")


@pytest.fixture(scope="module")
def bundle():
    d = gen_multilabel(800, seed=1)
    spec = NetworkSpec((4, 4), (
        LayerSpec(fan_in=(2, 2), output_dim=3, expansion=ExpansionSpec.quadratic(), scaling="qr", pre_pca_dim=3),
        LayerSpec(fan_in=(2, 2), output_dim=4, n_slow=2),
        LayerSpec(fan_in=(1, 1), output_dim=2, node_kind="gsfa"),
    ), "mixed")
    g, _ = serial_graph(d.labels["theta"], 10)
    net = train_network(spec, d.X, g)
    Y = net.train_output
    est = {"theta": train_soft_estimator(Y, d.labels["theta"], 10),
           "b1": train_gaussian_classifier(Y, d.labels["b1"].astype(int))}
    return d, ModelBundle(net, fit_global_reconstruction(Y, d.X), est, {"method": "higsfa", "seed": 1})


def _arrays(model):
    out = []
    for layer in model.network.nodes:
        for node in layer:
            out.extend(v for v in vars(node.model).values() if isinstance(v, np.ndarray))
            out.extend(v for v in vars(node.model.gsfa).values() if isinstance(v, np.ndarray))
            if node.pre_pca is not None:
                out.extend(vars(node.pre_pca).values())
    return out


def test_model_round_trip_is_bit_exact(bundle, tmp_path):
    d, model = bundle
    path = tmp_path / "m.hgsf"
    save_model(path, model)
    back = load_model(path)
    assert back.network.spec == model.network.spec
    assert back.info == model.info
    for a, b in zip(_arrays(model), _arrays(back)):
        assert a.tobytes() == b.tobytes()
    assert back.network.extract(d.X).tobytes() == model.network.extract(d.X).tobytes()
    assert back.network.train_output.tobytes() == model.network.train_output.tobytes()
    assert back.reconstruction.D.tobytes() == model.reconstruction.D.tobytes()
    soft = back.estimators["theta"]
    assert soft.representative_labels.tobytes() == model.estimators["theta"].representative_labels.tobytes()
    assert np.array_equal(back.estimators["b1"].means, model.estimators["b1"].means)


def test_version_mismatch_and_bad_magic(bundle, tmp_path):
    path = tmp_path / "m.hgsf"
    save_model(path, bundle[1])
    blob = bytearray(path.read_bytes())
    blob[4:8] = struct.pack("<I", 99)
    (tmp_path / "v.hgsf").write_bytes(bytes(blob))
    with pytest.raises(FormatError, match="version 99"):
        load_model(tmp_path / "v.hgsf")
    (tmp_path / "x.hgsf").write_bytes(b"NOPE" + bytes(blob[4:]))
    with pytest.raises(FormatError, match="not an HGSF"):
        load_model(tmp_path / "x.hgsf")


@pytest.mark.parametrize("cut", [3, 20, -1, -8])
def test_truncated_model_is_rejected(bundle, tmp_path, cut):
    path = tmp_path / "m.hgsf"
    save_model(path, bundle[1])
    blob = path.read_bytes()
    (tmp_path / "t.hgsf").write_bytes(blob[:cut])
    with pytest.raises(FormatError):
        load_model(tmp_path / "t.hgsf")


def test_corrupted_payload_is_rejected(tmp_path):
    write_container(tmp_path / "c.hgsf", {"a": np.arange(6.0).reshape(2, 3)}, {"k": 1})
    arrays, meta = read_container(tmp_path / "c.hgsf")
    assert np.array_equal(arrays["a"], np.arange(6.0).reshape(2, 3)) and meta == {"k": 1}
    blob = bytearray((tmp_path / "c.hgsf").read_bytes())
    blob[-3] ^= 0xFF
    (tmp_path / "c.hgsf").write_bytes(bytes(blob))
    with pytest.raises(FormatError, match="checksum"):
        read_container(tmp_path / "c.hgsf")


def test_dataset_round_trip(tmp_path):
    d = gen_multilabel(300, seed=2)
    path = tmp_path / "d.hgsd"
    save_dataset(path, d)
    assert path.read_bytes()[:4] == b"HGSD"
    rows, cols = struct.unpack_from("<II", path.read_bytes(), 4)
    assert rows == 300
    back = load_dataset(path)
    assert back.X.tobytes() == d.X.tobytes()
    assert np.array_equal(back.split, d.split)
    assert back.label_kinds == d.label_kinds
    for k in d.labels:
        assert np.array_equal(back.labels[k], d.labels[k])
    assert np.array_equal(back.latents["distractors"], d.latents["distractors"])
    assert back.params == d.params


def test_truncated_dataset_is_rejected(tmp_path):
    path = tmp_path / "d.hgsd"
    save_dataset(path, gen_multilabel(50, seed=3))
    (tmp_path / "t.hgsd").write_bytes(path.read_bytes()[:-10])
    with pytest.raises(FormatError):
        load_dataset(tmp_path / "t.hgsd")
    with pytest.raises(FormatError):
        load_model(path)


def test_no_temporary_files_left_behind(tmp_path):
    save_dataset(tmp_path / "d.hgsd", gen_multilabel(50, seed=4))
    assert [p.name for p in tmp_path.iterdir()] == ["d.hgsd"]
