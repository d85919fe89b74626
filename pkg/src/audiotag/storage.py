"""Binary containers for features and models, plus run manifests.

Byte layout of both containers (documented for cross-language readers):

    bytes 0..3   little-endian uint32, header byte length H
    bytes 4..4+H UTF-8 JSON header
    rest         raw little-endian float payload

Feature cache (schema "feature-cache/1"): header carries kind, frames,
dims, frame_period_ms, chunk_id and norm_stats_id; payload is frames*dims
float32 values, row-major.

Model file (schema "mlp/1"): header carries input_dim, a per-layer list of
{in, out, activation, dropout}, seed, norm_stats_id and an open "meta"
object; payload is, per layer, the row-major (out x in) weight matrix
followed by the bias vector, as float64.
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

from .dae import DaeConfig, DaeModel
from .errors import DataError
from .features import FEATURE_KINDS, FeatureMatrix, NormStats
from .net import DenseLayer, Mlp

FEATURE_SCHEMA = "feature-cache/1"
MODEL_SCHEMA = "mlp/1"


def _write_container(path, header, payload):
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(payload)


def _read_container(path):
    with open(path, "rb") as fh:
        raw = fh.read(4)
        if len(raw) < 4:
            raise DataError("%s: truncated container" % path)
        (header_len,) = struct.unpack("<I", raw)
        blob = fh.read(header_len)
        if len(blob) < header_len:
            raise DataError("%s: truncated header" % path)
        header = json.loads(blob.decode("utf-8"))
        payload = fh.read()
    return header, payload


def write_feature_matrix(path, matrix, norm_stats_id=None):
    header = {
        "schema": FEATURE_SCHEMA,
        "kind": matrix.kind,
        "frames": int(matrix.n_frames),
        "dims": int(matrix.dim),
        "frame_period_ms": matrix.frame_period_ms,
        "chunk_id": matrix.chunk_id,
        "norm_stats_id": norm_stats_id,
        "dtype": "<f4",
    }
    payload = np.ascontiguousarray(matrix.values, dtype="<f4").tobytes()
    _write_container(path, header, payload)


def read_feature_matrix(path):
    header, payload = _read_container(path)
    if header.get("schema") != FEATURE_SCHEMA:
        raise DataError("%s: not a feature cache file" % path)
    if header.get("kind") not in FEATURE_KINDS:
        raise DataError("%s: unknown feature kind %r" % (path, header.get("kind")))
    frames, dims = header["frames"], header["dims"]
    expected = frames * dims * 4
    if len(payload) != expected:
        raise DataError(
            "%s: payload is %d bytes, expected %d" % (path, len(payload), expected)
        )
    values = np.frombuffer(payload, dtype="<f4").reshape(frames, dims).astype(np.float64)
    matrix = FeatureMatrix(
        values=values,
        kind=header["kind"],
        chunk_id=header.get("chunk_id", ""),
        frame_period_ms=header.get("frame_period_ms", 10.0),
    )
    return matrix, header.get("norm_stats_id")


def save_mlp(path, model, norm_stats_id=None, meta=None):
    header = {
        "schema": MODEL_SCHEMA,
        "input_dim": int(model.input_dim),
        "layers": [
            {
                "in": int(l.in_dim),
                "out": int(l.out_dim),
                "activation": l.activation,
                "dropout": l.dropout_rate,
            }
            for l in model.layers
        ],
        "seed": model.seed,
        "norm_stats_id": norm_stats_id,
        "dtype": "<f8",
        "meta": meta or {},
    }
    parts = []
    for layer in model.layers:
        parts.append(np.ascontiguousarray(layer.weights, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(layer.biases, dtype="<f8").tobytes())
    _write_container(path, header, b"".join(parts))


def load_mlp(path):
    """Returns (model, header). The header keeps meta and norm_stats_id."""
    header, payload = _read_container(path)
    if header.get("schema") != MODEL_SCHEMA:
        raise DataError("%s: not a model file" % path)
    layers = []
    offset = 0
    for spec in header["layers"]:
        n_w = spec["out"] * spec["in"] * 8
        n_b = spec["out"] * 8
        if offset + n_w + n_b > len(payload):
            raise DataError("%s: truncated model payload" % path)
        weights = (
            np.frombuffer(payload, dtype="<f8", count=spec["out"] * spec["in"], offset=offset)
            .reshape(spec["out"], spec["in"])
            .copy()
        )
        offset += n_w
        biases = np.frombuffer(payload, dtype="<f8", count=spec["out"], offset=offset).copy()
        offset += n_b
        layers.append(
            DenseLayer(
                weights=weights,
                biases=biases,
                activation=spec["activation"],
                dropout_rate=spec["dropout"],
            )
        )
    model = Mlp(layers, seed=header.get("seed"))
    return model, header


def save_dae(path, model, norm_stats_id=None):
    meta = {"family": "dae", "config": model.config.__dict__.copy(), "cv_errors": model.cv_errors}
    meta["config"]["encoder_hidden"] = list(model.config.encoder_hidden)
    meta["config"]["decoder_hidden"] = list(model.config.decoder_hidden)
    save_mlp(path, model.net, norm_stats_id=norm_stats_id, meta=meta)


def load_dae(path):
    net, header = load_mlp(path)
    meta = header.get("meta", {})
    if meta.get("family") != "dae":
        raise DataError("%s: not an auto-encoder model file" % path)
    cfg = meta["config"].copy()
    cfg["encoder_hidden"] = tuple(cfg["encoder_hidden"])
    cfg["decoder_hidden"] = tuple(cfg["decoder_hidden"])
    model = DaeModel(net=net, config=DaeConfig(**cfg), cv_errors=list(meta.get("cv_errors", [])))
    return model, header


def save_norm_stats(path, stats):
    doc = {"mean": stats.mean.tolist(), "std": stats.std.tolist()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_norm_stats(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return NormStats(mean=np.asarray(doc["mean"]), std=np.asarray(doc["std"]))


def norm_stats_id(stats):
    """Short content hash so downstream artifacts can name their stats."""
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(stats.mean, dtype="<f8").tobytes())
    digest.update(np.ascontiguousarray(stats.std, dtype="<f8").tobytes())
    return digest.hexdigest()[:16]


def file_sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()
