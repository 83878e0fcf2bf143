"""Sparse binary features for candidate segments.

Every candidate segment ``word[i:j]`` produces a list of label-free *base*
feature strings (boundary n-gram contexts, affix gazetteer and dictionary
hits, letter successor variety bins, the segment string itself).  The
model conjoins each base string with the segment's label; transitions
between labels are separate ``TRANS:<prev>:<label>`` features.
"""
from __future__ import annotations

import hashlib
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .corpus_io import AffixGazetteer, DictionarySet

BEGIN = "BEGIN"
BOS = "\u22a5"  # ⊥
EOS = "\u22a4"  # ⊤
MAX_NGRAM = 8


@dataclass(frozen=True)
class FeatureConfig:
    max_context_ngram: int = 3
    use_affix: bool = False
    use_dict: bool = False
    use_conjunction: bool = True
    use_lsv: bool = False
    lsv_thresholds: tuple[int, ...] = (2, 4, 8, 16)
    # conjoin observed base features with every label, not just the gold one
    cross_product: bool = True

    def __post_init__(self):
        if not 1 <= self.max_context_ngram <= MAX_NGRAM:
            raise ValueError(f"max_context_ngram must be in [1, {MAX_NGRAM}]")
        th = tuple(self.lsv_thresholds)
        if any(b <= a for a, b in zip(th, th[1:])):
            raise ValueError("lsv_thresholds must be strictly increasing")
        object.__setattr__(self, "lsv_thresholds", th)


@dataclass
class LsvTable:
    successors: dict[str, int]
    predecessors: dict[str, int]

    def successor_variety(self, prefix: str) -> int:
        return self.successors.get(prefix, 0)

    def predecessor_variety(self, suffix: str) -> int:
        return self.predecessors.get(suffix, 0)


def build_lsv(corpus: Iterable[str]) -> LsvTable:
    """Count distinct letters following each proper prefix and preceding each
    proper suffix of the corpus words."""
    succ: dict[str, set] = defaultdict(set)
    pred: dict[str, set] = defaultdict(set)
    words = list(corpus)
    if not words:
        raise ValueError("LSV corpus is empty")
    for w in words:
        for i in range(1, len(w)):
            succ[w[:i]].add(w[i])
            pred[w[i:]].add(w[i - 1])
    return LsvTable(
        {k: len(v) for k, v in sorted(succ.items())},
        {k: len(v) for k, v in sorted(pred.items())},
    )


@dataclass(frozen=True)
class Resources:
    gazetteer: AffixGazetteer | None = None
    dictionary: DictionarySet | None = None
    lsv: LsvTable | None = None

    def fingerprints(self) -> dict[str, str]:
        out = {}
        if self.gazetteer is not None:
            out["gazetteer"] = _digest(
                ["P:" + p for p in sorted(self.gazetteer.prefixes)]
                + ["S:" + s for s in sorted(self.gazetteer.suffixes)]
            )
        if self.dictionary is not None:
            out["dictionary"] = _digest(sorted(self.dictionary.words))
        if self.lsv is not None:
            out["lsv"] = _digest(f"{k}\t{v}" for k, v in self.lsv.successors.items())
        return out


def _digest(lines: Iterable[str]) -> str:
    h = hashlib.sha256()
    for line in lines:
        h.update(line.encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()[:16]


def context_ngram_features(word: str, boundary: int, side: str, k: int) -> list[str]:
    if not 0 <= boundary <= len(word):
        raise ValueError(f"boundary {boundary} outside word of length {len(word)}")
    padded = BOS * k + word + EOS * k
    b = boundary + k
    out = []
    for n in range(1, k + 1):
        if side == "L":
            out.append(f"CTX:L:{n}:{padded[b - n:b]}")
        elif side == "R":
            out.append(f"CTX:R:{n}:{padded[b:b + n]}")
        else:
            raise ValueError(f"side must be 'L' or 'R', got {side!r}")
    return out


def gazetteer_features(segment: str, gaz: AffixGazetteer | None,
                       position_class: str | None = None) -> list[str]:
    # exact full-segment match; position_class is not used to gate the lookup
    if gaz is None:
        return []
    out = []
    if segment in gaz.suffixes:
        out.append("GAZ:SUF")
    if segment in gaz.prefixes:
        out.append("GAZ:PRE")
    return out


def _len_bucket(n: int) -> str:
    return str(n) if n < 5 else "5+"


def dictionary_features(segment: str, dictionary: DictionarySet | None) -> list[str]:
    if dictionary is None or segment not in dictionary:
        return []
    return ["DICT:HIT", f"DICT:LEN:{_len_bucket(len(segment))}"]


def conjunction_features(segment: str, label) -> list[str]:
    return [f"SEGTAG:{label}:{segment}"]


def lsv_features(word: str, boundary: int, table: LsvTable,
                 thresholds: Sequence[int]) -> list[str]:
    out = []
    if boundary > 0:
        sv = table.successor_variety(word[:boundary])
        out.extend(f"LSV:S:\u2265{t}" for t in thresholds if sv >= t)
    if boundary < len(word):
        pv = table.predecessor_variety(word[boundary:])
        out.extend(f"LSV:P:\u2265{t}" for t in thresholds if pv >= t)
    return out


def span_base_features(word: str, start: int, end: int, config: FeatureConfig,
                       resources: Resources) -> list[str]:
    """Label-free feature strings for the candidate segment ``word[start:end]``."""
    if not 0 <= start < end <= len(word):
        raise ValueError(f"span [{start}, {end}) invalid for word of length {len(word)}")
    k = config.max_context_ngram
    segment = word[start:end]
    feats = []
    for edge, pos in (("S", start), ("E", end)):
        for side in ("L", "R"):
            feats.extend(f"{edge}:{f}" for f in context_ngram_features(word, pos, side, k))
        if config.use_lsv and resources.lsv is not None:
            feats.extend(f"{edge}:{f}" for f in
                         lsv_features(word, pos, resources.lsv, config.lsv_thresholds))
    if config.use_affix:
        feats.extend(gazetteer_features(segment, resources.gazetteer))
    if config.use_dict:
        feats.extend(dictionary_features(segment, resources.dictionary))
    if config.use_conjunction:
        feats.append("SEG:" + segment)
    return feats


def conjoin(base: str, label: str) -> str:
    if base.startswith("SEG:"):
        return conjunction_features(base[4:], label)[0]
    return f"{base}@{label}"


def transition_feature(prev_label: str, label: str) -> str:
    return f"TRANS:{prev_label}:{label}"


class FeatureVocabulary:
    """Feature-string to dense index map; grows until frozen."""

    def __init__(self, strings: Iterable[str] = (), frozen: bool = False):
        self._index: dict[str, int] = {}
        self.frozen = False
        for s in strings:
            self.add(s)
        self.frozen = frozen

    def add(self, feature: str) -> int | None:
        idx = self._index.get(feature)
        if idx is None and not self.frozen:
            idx = self._index[feature] = len(self._index)
        return idx

    def get(self, feature: str) -> int | None:
        return self._index.get(feature)

    def freeze(self) -> "FeatureVocabulary":
        self.frozen = True
        return self

    def __len__(self) -> int:
        return len(self._index)

    def __contains__(self, feature: str) -> bool:
        return feature in self._index

    def strings(self) -> list[str]:
        return list(self._index)


@dataclass(frozen=True)
class SparseVector:
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if len(self.indices) and np.any(np.diff(self.indices) <= 0):
            raise ValueError("indices must be strictly increasing")

    @classmethod
    def from_indices(cls, indices: Iterable[int]) -> "SparseVector":
        idx = np.array(sorted(set(indices)), dtype=np.int64)
        return cls(idx, np.ones(len(idx)))

    def dot(self, weights: np.ndarray) -> float:
        return float(weights[self.indices] @ self.values)

    def __len__(self) -> int:
        return len(self.indices)


def featurize_strings(word: str, span: tuple[int, int], label: str, prev_label: str,
                      config: FeatureConfig, resources: Resources) -> list[str]:
    start, end = span
    feats = [conjoin(b, label) for b in span_base_features(word, start, end, config, resources)]
    feats.append(transition_feature(prev_label, label))
    return feats


def featurize(word: str, span: tuple[int, int], label, prev_label, config: FeatureConfig,
              resources: Resources, vocab: FeatureVocabulary) -> SparseVector:
    strings = featurize_strings(word, span, str(label), str(prev_label), config, resources)
    idx = (vocab.add(s) for s in strings)
    return SparseVector.from_indices(i for i in idx if i is not None)
