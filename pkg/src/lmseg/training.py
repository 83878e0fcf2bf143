"""L2-regularized maximum-likelihood training, grid tuning and final training."""
from __future__ import annotations

import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp

from .corpus_io import Dataset
from .features import (
    BEGIN,
    FeatureConfig,
    FeatureVocabulary,
    Resources,
    conjoin,
    span_base_features,
    transition_feature,
)
from .morphotags import build_tagset
from .semicrf import (
    Batch,
    Lattice,
    Model,
    SegmentTooLong,
    encode_word,
    observed_counts,
)

log = logging.getLogger(__name__)

Spans = list[tuple[int, int, str]]


class NumericError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    l2: float = 0.1
    lbfgs_history: int = 10
    max_iterations: int = 500
    tolerance: float = 1e-6
    seed: int = 0
    level: int = 2
    features: FeatureConfig = field(default_factory=FeatureConfig)
    max_segment_length: int | None = 12
    # "first": supervise with the first listed gold; "marginalize": sum over all golds
    multi_gold: str = "first"
    threads: int = 1
    batch_size: int = 64

    def __post_init__(self):
        if self.l2 < 0:
            raise ValueError("l2 must be non-negative")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if not 0 <= self.level <= 5:
            raise ValueError("level must be in [0, 5]")
        if self.multi_gold not in ("first", "marginalize"):
            raise ValueError("multi_gold must be 'first' or 'marginalize'")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["features"]["lsv_thresholds"] = list(self.features.lsv_thresholds)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        feats = dict(d.pop("features", {}))
        if "lsv_thresholds" in feats:
            feats["lsv_thresholds"] = tuple(feats["lsv_thresholds"])
        return cls(features=FeatureConfig(**feats), **d)


@dataclass(frozen=True)
class TuneGrid:
    l2: tuple[float, ...] = (0.1,)
    ngram: tuple[int, ...] = (3,)
    level: tuple[int, ...] = (2,)
    affix: tuple[bool, ...] = (False,)
    dict: tuple[bool, ...] = (False,)
    lsv: tuple[bool, ...] = (False,)

    def __post_init__(self):
        for name in ("l2", "ngram", "level", "affix", "dict", "lsv"):
            if not getattr(self, name):
                raise ValueError(f"grid axis {name!r} is empty")

    def cells(self, base: TrainConfig) -> list[TrainConfig]:
        out = []
        for l2, k, level, affix, dct, lsv in itertools.product(
                self.l2, self.ngram, self.level, self.affix, self.dict, self.lsv):
            feats = replace(base.features, max_context_ngram=k, use_affix=affix,
                            use_dict=dct, use_lsv=lsv)
            out.append(replace(base, l2=l2, level=level, features=feats))
        return out


def gold_spans(data: Dataset, level: int, mode: str = "first") -> list[tuple[str, list[Spans]]]:
    out = []
    for word, golds in data:
        chosen = golds[:1] if mode == "first" else golds
        out.append((word, [[(i, j, str(t)) for i, j, t in g.project(level).spans()]
                           for g in chosen]))
    return out


def build_vocabulary(examples: Sequence[tuple[str, list[Spans]]], labels: Sequence[str],
                     config: FeatureConfig, resources: Resources) -> FeatureVocabulary:
    """Transitions between every label pair, plus the label-conjoined features
    fired by gold segments (crossed with every label when ``cross_product``)."""
    vocab = FeatureVocabulary()
    for prev in list(labels) + [BEGIN]:
        for lab in labels:
            vocab.add(transition_feature(prev, lab))
    for word, analyses in examples:
        for spans in analyses:
            for i, j, lab in spans:
                for base in span_base_features(word, i, j, config, resources):
                    if base.startswith("SEG:") or not config.cross_product:
                        vocab.add(conjoin(base, lab))
                    else:
                        for other in labels:
                            vocab.add(conjoin(base, other))
    return vocab.freeze()


class Objective:
    """Regularized negative log-likelihood of a training set and its gradient."""

    def __init__(self, model: Model, examples: Sequence[tuple[str, list[Spans]]],
                 l2: float, batch_size: int = 64, threads: int = 1):
        self.model = model
        self.l2 = l2
        self.threads = max(1, threads)
        index = model.index
        feats = []
        for word, analyses in examples:
            try:
                wf = encode_word(word, index, model.config, model.resources,
                                 model.max_segment_length)
            except Exception as exc:
                raise type(exc)(f"{word!r}: {exc}") from exc
            feats.append((wf, analyses))
        self.words = [w for w, _ in examples]
        # longest words first keeps padding small; order is fixed for reproducible sums
        order = sorted(range(len(feats)), key=lambda k: (-feats[k][0].n, k))
        self.batches = []
        for start in range(0, len(order), batch_size):
            chunk = [feats[k] for k in order[start:start + batch_size]]
            batch = Batch([wf for wf, _ in chunk])
            single = all(len(a) == 1 for _, a in chunk)
            if single:
                obs = self._observed(chunk, [a[0] for _, a in chunk])
                self.batches.append((batch, obs, None))
            else:
                per_gold = [[self._observed([(wf, a)], [g]) for g in a] for wf, a in chunk]
                self.batches.append((batch, None, per_gold))

    def _observed(self, chunk, spans):
        try:
            return observed_counts(self.model, [wf for wf, _ in chunk], spans)
        except SegmentTooLong:
            raise
        except Exception as exc:
            raise type(exc)(f"in batch starting {chunk[0][0].word!r}: {exc}") from exc

    def _batch_value(self, item, weights):
        batch, obs, per_gold = item
        lat = Lattice(batch, self.model.index, weights)
        expected = lat.expected_counts()
        if per_gold is None:
            value = float(lat.logZ.sum() - obs @ weights)
            return value, expected - obs, lat
        value = float(lat.logZ.sum())
        grad = expected
        for golds in per_gold:
            scores = np.array([g @ weights for g in golds])
            num = logsumexp(scores)
            post = np.exp(scores - num)
            value -= num
            for p, g in zip(post, golds):
                grad = grad - p * g
        return value, grad, lat

    def __call__(self, weights: np.ndarray) -> tuple[float, np.ndarray]:
        if self.threads > 1 and len(self.batches) > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                parts = list(pool.map(lambda b: self._batch_value(b, weights), self.batches))
        else:
            parts = [self._batch_value(b, weights) for b in self.batches]
        value = 0.0
        grad = np.zeros_like(weights)
        for v, g, lat in parts:
            if not math.isfinite(v):
                bad = [w.word for w, z in zip(lat.batch.words, lat.logZ) if not np.isfinite(z)]
                raise NumericError(
                    f"non-finite objective (words {bad[:5]}, {len(weights)} features)"
                )
            value += v
            grad += g
        value += 0.5 * self.l2 * float(weights @ weights)
        grad += self.l2 * weights
        return value, grad


def objective(weights: np.ndarray, model: Model, train: Dataset, cfg: TrainConfig):
    examples = gold_spans(train, cfg.level, cfg.multi_gold) if len(train) else []
    if not examples:
        return 0.5 * cfg.l2 * float(weights @ weights), cfg.l2 * weights
    return Objective(model, examples, cfg.l2, cfg.batch_size, cfg.threads)(weights)


def _check_lengths(examples, m):
    if m is None:
        return
    for word, analyses in examples:
        for spans in analyses:
            for i, j, _ in spans:
                if j - i > m:
                    raise SegmentTooLong(
                        f"gold segment {word[i:j]!r} of {word!r} exceeds "
                        f"max_segment_length={m}; raise the limit or drop the word"
                    )


def prepare_model(train: Dataset, cfg: TrainConfig, resources: Resources,
                  labels: Sequence[str] | None = None, examples=None) -> tuple[Model, list]:
    if examples is None:
        examples = gold_spans(train, cfg.level, cfg.multi_gold)
    _check_lengths(examples, cfg.max_segment_length)
    if labels is None:
        labels = build_tagset(train.all_golds(), cfg.level).labels()
    vocab = build_vocabulary(examples, labels, cfg.features, resources)
    model = Model(tuple(labels), vocab, np.zeros(len(vocab)), cfg.features,
                  cfg.max_segment_length, cfg.level, resources, resources.fingerprints(),
                  cfg.to_dict())
    return model, examples


@dataclass
class FitResult:
    model: Model
    log: list[tuple[int, float, float]]
    objective: float
    seconds: float
    converged: bool


def fit_examples(model: Model, examples, cfg: TrainConfig,
                 x0: np.ndarray | None = None) -> FitResult:
    t0 = time.perf_counter()
    obj = Objective(model, examples, cfg.l2, cfg.batch_size, cfg.threads)
    x0 = np.zeros(len(model.vocab)) if x0 is None else np.asarray(x0, dtype=float)
    history: list[tuple[int, float, float]] = []
    last = {}

    def fun(w):
        v, g = obj(w)
        last["v"], last["g"] = v, g
        return v, g

    def callback(intermediate_result):
        g = last.get("g")
        history.append((len(history) + 1, float(intermediate_result.fun),
                        float(np.linalg.norm(g)) if g is not None else float("nan")))
        log.debug("iter %d objective %.6f", len(history), intermediate_result.fun)

    res = minimize(fun, x0, jac=True, method="L-BFGS-B", callback=callback,
                   options={"maxcor": cfg.lbfgs_history, "maxiter": cfg.max_iterations,
                            "ftol": cfg.tolerance, "gtol": 1e-9, "maxls": 40})
    if not np.all(np.isfinite(res.x)) or not math.isfinite(res.fun):
        raise NumericError(f"optimizer returned non-finite values ({len(res.x)} features)")
    trained = model.with_weights(res.x)
    return FitResult(trained, history, float(res.fun), time.perf_counter() - t0,
                     bool(res.success))


def fit(train: Dataset, cfg: TrainConfig, resources: Resources = Resources(),
        labels: Sequence[str] | None = None) -> Model:
    return fit_detailed(train, cfg, resources, labels).model


def fit_detailed(train: Dataset, cfg: TrainConfig, resources: Resources = Resources(),
                 labels: Sequence[str] | None = None) -> FitResult:
    if not len(train):
        raise ValueError("training set is empty")
    model, examples = prepare_model(train, cfg, resources, labels)
    result = fit_examples(model, examples, cfg)
    result.model.train_log = result.log
    return result


def train_final(train: Dataset, tune: Dataset, dev: Dataset, cfg: TrainConfig,
                resources: Resources = Resources()) -> Model:
    seen: dict[str, str] = {}
    for part in (train, tune, dev):
        for w in part.words:
            if w in seen:
                raise ValueError(f"word {w!r} occurs in both {seen[w]} and {part.role}")
            seen[w] = part.role
    return fit(Dataset.concat((train, tune, dev)), cfg, resources)


@dataclass
class TuneReport:
    best: TrainConfig
    rows: list[tuple[TrainConfig, float, list[float]]]

    def to_tsv(self) -> str:
        lines = ["l2\tngram\tlevel\taffix\tdict\tlsv\tmean\tfolds"]
        for cfg, mean, scores in self.rows:
            f = cfg.features
            lines.append("\t".join([
                repr(cfg.l2), str(f.max_context_ngram), str(cfg.level), str(int(f.use_affix)),
                str(int(f.use_dict)), str(int(f.use_lsv)), f"{mean:.6f}",
                ",".join(f"{s:.6f}" for s in scores),
            ]))
        return "\n".join(lines) + "\n"


def tune(folds: Sequence[tuple[Dataset, Dataset, Dataset]], grid: TuneGrid,
         metric: Callable[[Model, Dataset], float], base: TrainConfig = TrainConfig(),
         resources: Resources = Resources()) -> TuneReport:
    """Mean Tune-set score per grid cell; ties go to smaller level, l2, then n-gram."""
    rows = []
    for cell in grid.cells(base):
        scores = [metric(fit(train, cell, resources), tune_set) for train, tune_set, _ in folds]
        rows.append((cell, float(np.mean(scores)), scores))
    best = min(rows, key=lambda r: (-r[1], r[0].level, r[0].l2,
                                    r[0].features.max_context_ngram))[0]
    return TuneReport(best, rows)
