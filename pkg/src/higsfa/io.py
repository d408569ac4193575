"""Binary containers for trained models (HGSF) and datasets (HGSD).

HGSF layout::

    b"HGSF" | u32 version | u64 header length | JSON header | f64 payload

The JSON header holds a directory of named arrays (``name``, ``shape``,
``offset`` in bytes from the payload start), the payload length, a CRC32 of
the payload and free-form metadata. Arrays are little-endian IEEE-754
doubles in row-major order.

HGSD layout::

    b"HGSD" | u32 rows | u32 cols | rows*cols f64 | JSON footer | u32 footer length

All writes go to a temporary file in the target directory that is renamed
into place, so readers never see a partial file.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
import zlib
from pathlib import Path

import numpy as np

from .datasets import SPLITS, DatasetBundle
from .errors import FormatError
from .expansions import ExpansionSpec
from .gsfa import GSFAModel, PCAModel
from .hierarchy import (GlobalReconstructionModel, NetworkNode, NetworkSpec, TrainedNetwork,
                        build_network)
from .node import GSFANodeModel, IGSFANodeModel
from .supervised import GaussianClassifier, SoftEstimatorModel

__all__ = [
    "MODEL_MAGIC",
    "DATA_MAGIC",
    "FORMAT_VERSION",
    "write_container",
    "read_container",
    "save_model",
    "load_model",
    "ModelBundle",
    "save_dataset",
    "load_dataset",
    "atomic_write_bytes",
    "atomic_write_text",
]

MODEL_MAGIC = b"HGSF"
DATA_MAGIC = b"HGSD"
FORMAT_VERSION = 1
_F64 = np.dtype("<f8")


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


# ---------------------------------------------------------------------------
# generic named-array container


def write_container(path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    directory, chunks, offset = [], [], 0
    for name, arr in arrays.items():
        a = np.ascontiguousarray(arr, dtype=_F64)
        directory.append({"name": name, "shape": list(a.shape), "offset": offset})
        chunks.append(a.tobytes())
        offset += a.nbytes
    payload = b"".join(chunks)
    header = json.dumps({"arrays": directory, "payload_bytes": len(payload),
                         "payload_crc32": zlib.crc32(payload), "meta": meta or {}},
                        sort_keys=True).encode("utf-8")
    blob = MODEL_MAGIC + struct.pack("<IQ", FORMAT_VERSION, len(header)) + header + payload
    atomic_write_bytes(path, blob)


def read_container(path) -> tuple[dict[str, np.ndarray], dict]:
    blob = Path(path).read_bytes()
    if len(blob) < 16 or blob[:4] != MODEL_MAGIC:
        raise FormatError(f"{path}: not an HGSF model file")
    version, hlen = struct.unpack_from("<IQ", blob, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: format version {version}, this build reads version {FORMAT_VERSION}")
    if len(blob) < 16 + hlen:
        raise FormatError(f"{path}: truncated header")
    try:
        header = json.loads(blob[16:16 + hlen])
    except ValueError as exc:
        raise FormatError(f"{path}: corrupt header") from exc
    payload = blob[16 + hlen:]
    if len(payload) != header["payload_bytes"]:
        raise FormatError(f"{path}: truncated file, payload has {len(payload)} of "
                          f"{header['payload_bytes']} bytes")
    if zlib.crc32(payload) != header["payload_crc32"]:
        raise FormatError(f"{path}: payload checksum mismatch")
    arrays = {}
    for entry in header["arrays"]:
        count = int(np.prod(entry["shape"], dtype=np.int64))
        a = np.frombuffer(payload, dtype=_F64, count=count, offset=entry["offset"])
        arrays[entry["name"]] = a.reshape(entry["shape"]).astype(float)
    return arrays, header["meta"]


# ---------------------------------------------------------------------------
# model (network plus optional supervised and reconstruction stages)


class ModelBundle:
    """What a model file holds: a network and the optional later stages."""

    def __init__(self, network: TrainedNetwork,
                 reconstruction: GlobalReconstructionModel | None = None,
                 estimators: dict[str, object] | None = None,
                 info: dict | None = None):
        self.network = network
        self.reconstruction = reconstruction
        self.estimators = estimators or {}
        self.info = info or {}


def _put_gsfa(out, prefix, g: GSFAModel):
    out[prefix + "projection"] = g.projection
    out[prefix + "input_offset"] = g.input_offset
    out[prefix + "deltas"] = g.deltas


def _get_gsfa(arrs, prefix, rank_used) -> GSFAModel:
    return GSFAModel(arrs[prefix + "projection"], arrs[prefix + "input_offset"],
                     arrs[prefix + "deltas"], int(rank_used))


def _put_pca(out, prefix, p: PCAModel):
    out[prefix + "mean"] = p.mean
    out[prefix + "components"] = p.components
    out[prefix + "variances"] = p.variances


def _get_pca(arrs, prefix) -> PCAModel:
    return PCAModel(arrs[prefix + "mean"], arrs[prefix + "components"], arrs[prefix + "variances"])


def _node_to(out, prefix, node: NetworkNode) -> dict:
    m = node.model
    meta = {"kind": m.kind, "input_dim": m.input_dim, "output_dim": m.output_dim,
            "expansion": m.expansion.to_json(), "rank_used": m.gsfa.rank_used,
            "pre_pca": node.pre_pca is not None}
    if node.pre_pca is not None:
        _put_pca(out, prefix + "pre_pca/", node.pre_pca)
    out[prefix + "x_mean"] = m.x_mean
    _put_gsfa(out, prefix + "gsfa/", m.gsfa)
    if m.kind == "igsfa":
        meta.update({"delta_threshold": m.delta_threshold, "n_slow": m.n_slow,
                     "scaling": m.scaling, "scale_floor": m.scale_floor,
                     "forced_slow": m.forced_slow})
        out[prefix + "M"] = m.M
        out[prefix + "b"] = m.b
        if m.scaling == "qr":
            out[prefix + "Q"] = m.Q
            out[prefix + "R"] = m.R
        else:
            out[prefix + "lambdas"] = m.lambdas
        _put_pca(out, prefix + "pca/", m.pca)
    return meta


def _node_from(arrs, prefix, meta) -> NetworkNode:
    pre = _get_pca(arrs, prefix + "pre_pca/") if meta["pre_pca"] else None
    expansion = ExpansionSpec.from_json(meta["expansion"])
    gsfa = _get_gsfa(arrs, prefix + "gsfa/", meta["rank_used"])
    x_mean = arrs[prefix + "x_mean"]
    if meta["kind"] == "gsfa":
        return NetworkNode(GSFANodeModel(meta["input_dim"], meta["output_dim"], expansion, x_mean, gsfa), pre)
    qr = meta["scaling"] == "qr"
    model = IGSFANodeModel(
        meta["input_dim"], meta["output_dim"], meta["delta_threshold"], expansion, x_mean, gsfa,
        meta["n_slow"], arrs[prefix + "M"], arrs[prefix + "b"], meta["scaling"],
        arrs[prefix + "Q"] if qr else None, arrs[prefix + "R"] if qr else None,
        None if qr else arrs[prefix + "lambdas"], _get_pca(arrs, prefix + "pca/"),
        meta["scale_floor"], meta["forced_slow"])
    return NetworkNode(model, pre)


def save_model(path, model: ModelBundle | TrainedNetwork) -> None:
    if isinstance(model, TrainedNetwork):
        model = ModelBundle(model)
    net = model.network
    arrays: dict[str, np.ndarray] = {}
    node_meta = []
    for l, layer_nodes in enumerate(net.nodes, start=1):
        node_meta.append([_node_to(arrays, f"layer{l}/node{k}/", node)
                          for k, node in enumerate(layer_nodes)])
    if net.train_output is not None:
        arrays["train_output"] = net.train_output
    meta = {"network": net.spec.to_json(), "nodes": node_meta, "info": model.info,
            "reconstruction": model.reconstruction is not None, "estimators": {}}
    if model.reconstruction is not None:
        arrays["reconstruction/D"] = model.reconstruction.D
        arrays["reconstruction/c"] = model.reconstruction.c
    for name, est in model.estimators.items():
        p = f"estimator/{name}/"
        clf = est.classifier if isinstance(est, SoftEstimatorModel) else est
        arrays[p + "means"] = clf.means
        arrays[p + "chols"] = clf.chols
        arrays[p + "log_priors"] = clf.log_priors
        entry = {"kind": "soft" if isinstance(est, SoftEstimatorModel) else "classifier",
                 "shrinkage": clf.shrinkage}
        if isinstance(est, SoftEstimatorModel):
            arrays[p + "representative_labels"] = est.representative_labels
            arrays[p + "group_edges"] = est.group_edges
        meta["estimators"][name] = entry
    write_container(path, arrays, meta)


def load_model(path) -> ModelBundle:
    arrays, meta = read_container(path)
    try:
        spec = NetworkSpec.from_json(meta["network"])
        plans = build_network(spec)
        nodes = [[_node_from(arrays, f"layer{l}/node{k}/", nm) for k, nm in enumerate(layer)]
                 for l, layer in enumerate(meta["nodes"], start=1)]
        net = TrainedNetwork(spec, plans, nodes, arrays.get("train_output"))
        rec = None
        if meta["reconstruction"]:
            rec = GlobalReconstructionModel(arrays["reconstruction/D"], arrays["reconstruction/c"])
        estimators = {}
        for name, entry in meta["estimators"].items():
            p = f"estimator/{name}/"
            clf = GaussianClassifier(arrays[p + "means"], arrays[p + "chols"],
                                     arrays[p + "log_priors"], entry["shrinkage"])
            if entry["kind"] == "soft":
                estimators[name] = SoftEstimatorModel(clf, arrays[p + "representative_labels"],
                                                      arrays[p + "group_edges"])
            else:
                estimators[name] = clf
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: inconsistent model file ({exc})") from exc
    return ModelBundle(net, rec, estimators, meta.get("info", {}))


# ---------------------------------------------------------------------------
# datasets


def save_dataset(path, bundle: DatasetBundle) -> None:
    cols = [bundle.X]
    columns = [{"name": f"x{k}", "role": "input"} for k in range(bundle.input_dim)]
    for name, v in bundle.labels.items():
        cols.append(np.asarray(v, dtype=float)[:, None])
        columns.append({"name": name, "role": "label", "kind": bundle.label_kinds[name]})
    for name, v in bundle.latents.items():
        v = np.asarray(v, dtype=float).reshape(bundle.n_samples, -1)
        cols.append(v)
        columns.extend({"name": name, "role": "latent", "index": k} for k in range(v.shape[1]))
    cols.append(bundle.split[:, None].astype(float))
    columns.append({"name": "split", "role": "split", "levels": list(SPLITS)})
    data = np.ascontiguousarray(np.hstack(cols), dtype=_F64)
    footer = json.dumps({"name": bundle.name, "params": bundle.params, "columns": columns},
                        sort_keys=True).encode("utf-8")
    rows, ncols = data.shape
    blob = (DATA_MAGIC + struct.pack("<II", rows, ncols) + data.tobytes() + footer
            + struct.pack("<I", len(footer)))
    atomic_write_bytes(path, blob)


def load_dataset(path) -> DatasetBundle:
    blob = Path(path).read_bytes()
    if len(blob) < 16 or blob[:4] != DATA_MAGIC:
        raise FormatError(f"{path}: not an HGSD dataset file")
    rows, ncols = struct.unpack_from("<II", blob, 4)
    (flen,) = struct.unpack_from("<I", blob, len(blob) - 4)
    nbytes = rows * ncols * 8
    if len(blob) != 12 + nbytes + flen + 4:
        raise FormatError(f"{path}: truncated or padded file ({len(blob)} bytes, expected "
                          f"{12 + nbytes + flen + 4})")
    try:
        footer = json.loads(blob[12 + nbytes:12 + nbytes + flen])
    except ValueError as exc:
        raise FormatError(f"{path}: corrupt footer") from exc
    data = np.frombuffer(blob, dtype=_F64, count=rows * ncols, offset=12).reshape(rows, ncols).copy()
    columns = footer["columns"]
    if len(columns) != ncols:
        raise FormatError(f"{path}: footer describes {len(columns)} columns, data has {ncols}")
    inputs, labels, kinds, latents, split = [], {}, {}, {}, None
    for k, col in enumerate(columns):
        role = col["role"]
        if role == "input":
            inputs.append(k)
        elif role == "label":
            labels[col["name"]] = data[:, k]
            kinds[col["name"]] = col.get("kind", "numeric")
        elif role == "latent":
            latents.setdefault(col["name"], []).append(k)
        elif role == "split":
            split = data[:, k].astype(np.int64)
    lat = {}
    for name, idx in latents.items():
        lat[name] = data[:, idx[0]] if len(idx) == 1 else data[:, idx]
    return DatasetBundle(footer.get("name", "dataset"), data[:, inputs], labels, kinds, lat,
                         split, footer.get("params", {}))
