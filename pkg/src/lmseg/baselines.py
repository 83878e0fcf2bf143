"""Comparison systems: a character-level CRF and whole-word MaxEnt tag classifiers."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize
from scipy.special import logsumexp

from .corpus_io import Dataset
from .evaluation import inflection_bundle
from .features import Resources
from .morphotags import LabeledSegmentation, TagError, inflectional_view, parse_tag
from .optim import owlqn
from .semicrf import Model, viterbi
from .training import TrainConfig, fit_examples, prepare_model

CONTINUE = "~I"
EMPTY_TAG = "_"


# character-level CRF

def char_crf_mode(cfg: TrainConfig) -> TrainConfig:
    """The same trainer restricted to single-character segments."""
    return replace(cfg, max_segment_length=1)


def char_labels(spans) -> list[tuple[int, int, str]]:
    """Split labeled spans into characters; non-initial characters carry CONTINUE."""
    out = []
    for i, j, lab in spans:
        for k in range(i, j):
            out.append((k, k + 1, lab if k == i else lab + CONTINUE))
    return out


def merge_chars(word: str, labels: Sequence[str]):
    """Rebuild segments from per-character labels.

    A character starts a new segment unless it carries the continuation
    marker of the preceding character's label.
    """
    if len(labels) != len(word):
        raise ValueError(f"{len(labels)} labels for {len(word)} characters")
    pieces: list[list] = []
    for ch, lab in zip(word, labels):
        base = lab[:-len(CONTINUE)] if lab.endswith(CONTINUE) else lab
        if pieces and lab.endswith(CONTINUE) and pieces[-1][1] == base:
            pieces[-1][0] += ch
        else:
            pieces.append([ch, base])
    try:
        return LabeledSegmentation.from_pairs((m, parse_tag(t)) for m, t in pieces)
    except (TagError, ValueError):
        return tuple((m, t) for m, t in pieces)


def char_examples(data: Dataset, level: int) -> list[tuple[str, list]]:
    return [(w, [char_labels([(i, j, str(t)) for i, j, t in golds[0].project(level).spans()])])
            for w, golds in data]


def fit_char_crf(train: Dataset, cfg: TrainConfig, resources: Resources = Resources()) -> Model:
    cfg = char_crf_mode(cfg)
    examples = char_examples(train, cfg.level)
    labels = sorted({lab for _, a in examples for spans in a for _, _, lab in spans})
    model, examples = prepare_model(train, cfg, resources, labels, examples)
    return fit_examples(model, examples, cfg).model


def char_predict(model: Model, word: str):
    out = viterbi(model, word)
    return merge_chars(word, [model.labels[k] for k in out.label_indices])


# MaxEnt whole-word classifiers

@dataclass(frozen=True)
class MaxEntConfig:
    max_ngram: int = 3
    regularizer: str = "L1"
    coefficient: float = 0.1
    split_mode: bool = False
    # granularity of the inflectional tags that make up the full tag
    level: int = 5
    max_iterations: int = 500
    tolerance: float = 1e-7
    seed: int = 0

    def __post_init__(self):
        if self.max_ngram < 1:
            raise ValueError("max_ngram must be at least 1")
        if self.coefficient < 0:
            raise ValueError("coefficient must be non-negative")
        if self.regularizer not in ("L1", "L2"):
            raise ValueError("regularizer must be 'L1' or 'L2'")


def char_ngrams(word: str, k: int) -> list[str]:
    """Distinct n-grams (n <= k) of the word with begin and end markers."""
    marked = f"^{word}$"
    grams = {marked[i:i + n] for n in range(1, k + 1) for i in range(len(marked) - n + 1)}
    grams -= {"^", "$"}
    return sorted(grams)


def full_tag(ls: LabeledSegmentation, level: int = 5) -> str:
    """Ordered inflectional bundle joined by ':' (EMPTY_TAG for none)."""
    bundle = inflection_bundle(inflectional_view(ls, level))
    return ":".join(bundle) if bundle else EMPTY_TAG


def tag_targets(data: Dataset, level: int = 5) -> list[tuple[str, str]]:
    return [(w, full_tag(golds[0], level)) for w, golds in data]


def _constituents(tag: str) -> list[str]:
    return [] if tag == EMPTY_TAG else sorted(set(tag.split(":")))


@dataclass
class MaxEntClassifier:
    config: MaxEntConfig
    features: tuple[str, ...]
    classes: tuple[str, ...]
    parts: tuple[str, ...]
    weights: np.ndarray  # (features + bias) x parts

    def __post_init__(self):
        self._feature_index = {f: k for k, f in enumerate(self.features)}
        self._class_parts = _part_matrix(self.classes, self.parts)

    @property
    def n_parameters(self) -> int:
        return self.weights.size

    def scores(self, word: str) -> np.ndarray:
        rows = [self._feature_index[g] for g in char_ngrams(word, self.config.max_ngram)
                if g in self._feature_index]
        part_scores = self.weights[rows].sum(axis=0) + self.weights[-1]
        return self._class_parts @ part_scores


def _part_matrix(classes, parts) -> sp.csr_matrix:
    index = {p: k for k, p in enumerate(parts)}
    rows, cols = [], []
    for c, tag in enumerate(classes):
        keys = [tag] + [f"PART:{x}" for x in _constituents(tag)]
        for key in keys:
            if key in index:
                rows.append(c)
                cols.append(index[key])
    return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(classes), len(parts)))


def maxent_train(data: Sequence[tuple[str, str]], cfg: MaxEntConfig) -> MaxEntClassifier:
    """Multinomial log-linear classifier over observed full tags."""
    for w, tag in data:
        if not tag:
            raise ValueError(f"word {w!r} has no tag")
    if not data:
        raise ValueError("no training data")
    classes = tuple(sorted({t for _, t in data}))
    parts = list(classes)
    if cfg.split_mode:
        parts += sorted({f"PART:{x}" for c in classes for x in _constituents(c)})
    grams = [char_ngrams(w, cfg.max_ngram) for w, _ in data]
    features = tuple(sorted({g for gs in grams for g in gs}))
    findex = {f: k for k, f in enumerate(features)}
    F, P = len(features) + 1, len(parts)
    rows = [r for r, gs in enumerate(grams) for _ in range(len(gs) + 1)]
    cols = [c for gs in grams for c in [findex[g] for g in gs] + [F - 1]]
    X = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(data), F))
    XT = X.T.tocsr()
    A = _part_matrix(classes, parts).toarray()
    cindex = {c: k for k, c in enumerate(classes)}
    gold = np.array([cindex[t] for _, t in data])
    Y = sp.csr_matrix((np.ones(len(data)), (np.arange(len(data)), gold)),
                      shape=(len(data), len(classes)))
    observed = XT @ (Y @ A)
    penalized = np.ones((F, P))
    penalized[-1] = 0.0  # class priors are not regularized

    def nll(flat):
        theta = flat.reshape(F, P)
        s = (X @ theta) @ A.T
        z = logsumexp(s, axis=1)
        prob = np.exp(s - z[:, None])
        value = float(z.sum() - s[np.arange(len(gold)), gold].sum())
        grad = XT @ (prob @ A) - observed
        return value, np.asarray(grad).ravel()

    rng = np.random.default_rng(cfg.seed)
    x0 = rng.normal(scale=0.01, size=F * P)
    if cfg.regularizer == "L1":
        res = owlqn(nll, x0, cfg.coefficient * penalized.ravel(),
                    max_iterations=cfg.max_iterations, tolerance=cfg.tolerance)
        x = res.x
    else:
        mask = penalized.ravel()

        def smooth(flat):
            v, g = nll(flat)
            return (v + 0.5 * cfg.coefficient * float((mask * flat) @ flat),
                    g + cfg.coefficient * mask * flat)

        x = minimize(smooth, x0, jac=True, method="L-BFGS-B",
                     options={"maxiter": cfg.max_iterations, "ftol": cfg.tolerance,
                              "gtol": 1e-9}).x
    return MaxEntClassifier(cfg, features, classes, tuple(parts), x.reshape(F, P))


def maxent_objective(clf: MaxEntClassifier, data: Sequence[tuple[str, str]]) -> float:
    """Regularized training objective at the classifier's weights."""
    cindex = {c: k for k, c in enumerate(clf.classes)}
    value = 0.0
    for w, t in data:
        s = clf.scores(w)
        value += float(logsumexp(s) - s[cindex[t]])
    theta = clf.weights[:-1]
    if clf.config.regularizer == "L1":
        return value + clf.config.coefficient * float(np.abs(theta).sum())
    return value + 0.5 * clf.config.coefficient * float((theta * theta).sum())


def maxent_predict(clf: MaxEntClassifier, word: str) -> str:
    """Highest-scoring full tag; ties go to the smaller class index."""
    return clf.classes[int(np.argmax(clf.scores(word)))]
