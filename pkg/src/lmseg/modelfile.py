"""Sectioned model container shared by the segmenter and the MaxEnt baseline.

Layout: one ASCII header line ``LMSEG-MODEL <version> <type>\\n`` followed by
sections, each a big-endian u32 name length, the UTF-8 name, a u64 payload
length and the payload.
"""
from __future__ import annotations

import json
import struct
import warnings
from typing import BinaryIO

import numpy as np

from .baselines import MaxEntClassifier, MaxEntConfig
from .features import FeatureConfig, FeatureVocabulary, Resources
from .semicrf import Model

MAGIC = "LMSEG-MODEL"
VERSION = 1
TYPES = ("semicrf", "maxent")


class ModelFormatError(ValueError):
    pass


class ResourceMismatchWarning(UserWarning):
    pass


def _json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":")).encode()


def _weights_bytes(w: np.ndarray) -> bytes:
    return np.ascontiguousarray(w, dtype="<f8").tobytes()


def write_sections(stream: BinaryIO, kind: str, sections: list[tuple[str, bytes]]) -> None:
    stream.write(f"{MAGIC} {VERSION} {kind}\n".encode("ascii"))
    for name, payload in sections:
        raw = name.encode("utf-8")
        stream.write(struct.pack(">I", len(raw)))
        stream.write(raw)
        stream.write(struct.pack(">Q", len(payload)))
        stream.write(payload)


def read_sections(stream: BinaryIO) -> tuple[str, dict[str, bytes]]:
    header = stream.readline().decode("ascii", errors="replace").split()
    if len(header) != 3 or header[0] != MAGIC:
        raise ModelFormatError("not a model file (bad header)")
    if header[1] != str(VERSION):
        raise ModelFormatError(f"model format version {header[1]} is not supported "
                               f"(expected {VERSION})")
    if header[2] not in TYPES:
        raise ModelFormatError(f"unknown model type {header[2]!r}")
    sections = {}
    while True:
        head = stream.read(4)
        if not head:
            break
        if len(head) != 4:
            raise ModelFormatError("truncated section header")
        (n,) = struct.unpack(">I", head)
        name = stream.read(n).decode("utf-8")
        size_raw = stream.read(8)
        if len(size_raw) != 8:
            raise ModelFormatError(f"truncated section {name!r}")
        (size,) = struct.unpack(">Q", size_raw)
        payload = stream.read(size)
        if len(payload) != size:
            raise ModelFormatError(f"truncated section {name!r}")
        sections[name] = payload
    return header[2], sections


def _require(sections, *names):
    missing = [n for n in names if n not in sections]
    if missing:
        raise ModelFormatError(f"model file lacks sections {missing}")


def save_model(model, path) -> None:
    if isinstance(model, MaxEntClassifier):
        kind = "maxent"
        cfg = model.config
        sections = [
            ("config", _json(cfg.__dict__)),
            ("features", _json(list(model.features))),
            ("classes", _json(list(model.classes))),
            ("parts", _json(list(model.parts))),
            ("weights", _weights_bytes(model.weights)),
        ]
    else:
        kind = "semicrf"
        cfg = dict(model.config.__dict__)
        cfg["lsv_thresholds"] = list(cfg["lsv_thresholds"])
        sections = [
            ("config", _json({"features": cfg, "train": model.train_config,
                              "max_segment_length": model.max_segment_length,
                              "level": model.level})),
            ("tagset", _json({"level": model.level, "labels": list(model.labels)})),
            ("vocab", _json(model.vocab.strings())),
            ("weights", _weights_bytes(model.weights)),
            ("fingerprints", _json(model.fingerprints)),
        ]
    with open(path, "wb") as fh:
        write_sections(fh, kind, sections)


def load_model(path, resources: Resources | None = None):
    """Load either model type; warns when supplied resources differ from training."""
    with open(path, "rb") as fh:
        kind, sections = read_sections(fh)
    try:
        if kind == "maxent":
            _require(sections, "config", "features", "classes", "parts", "weights")
            cfg = MaxEntConfig(**json.loads(sections["config"]))
            features = tuple(json.loads(sections["features"]))
            parts = tuple(json.loads(sections["parts"]))
            w = np.frombuffer(sections["weights"], dtype="<f8").astype(np.float64)
            return MaxEntClassifier(cfg, features, tuple(json.loads(sections["classes"])),
                                    parts, w.reshape(len(features) + 1, len(parts)))
        _require(sections, "config", "tagset", "vocab", "weights", "fingerprints")
        conf = json.loads(sections["config"])
        feats = dict(conf["features"])
        feats["lsv_thresholds"] = tuple(feats["lsv_thresholds"])
        tagset = json.loads(sections["tagset"])
        vocab = FeatureVocabulary(json.loads(sections["vocab"]))
        weights = np.frombuffer(sections["weights"], dtype="<f8").astype(np.float64)
        fingerprints = json.loads(sections["fingerprints"])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"corrupt model file: {exc}") from exc
    resources = resources or Resources()
    check_fingerprints(fingerprints, resources)
    return Model(tuple(tagset["labels"]), vocab, weights, FeatureConfig(**feats),
                 conf["max_segment_length"], tagset["level"], resources, fingerprints,
                 conf["train"])


def check_fingerprints(stored: dict, resources: Resources) -> list[str]:
    current = resources.fingerprints()
    names = sorted(set(stored) | set(current))
    bad = [n for n in names if stored.get(n) != current.get(n)]
    for n in bad:
        warnings.warn(f"resource {n!r} differs from the one used in training",
                      ResourceMismatchWarning, stacklevel=3)
    return bad
