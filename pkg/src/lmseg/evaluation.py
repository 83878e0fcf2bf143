"""Segmentation, stemming, root detection and tag classification metrics.

Every metric compares one prediction per word with all of the word's gold
analyses and keeps the best match.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .corpus_io import Dataset
from .morphotags import (
    AFFIXES,
    GranularityError,
    LabeledSegmentation,
    derive_views,
    label_granularity,
    project,
)


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class BoundaryScore:
    precision: float
    recall: float
    f1: float
    gold_index: int = 0


def _prf(pred: frozenset, gold: frozenset) -> tuple[float, float, float]:
    if not pred and not gold:
        return 1.0, 1.0, 1.0
    hit = len(pred & gold)
    p = hit / len(pred) if pred else 0.0
    r = hit / len(gold) if gold else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def boundary_prf(pred: frozenset, golds: Sequence[frozenset]) -> BoundaryScore:
    best = None
    for k, gold in enumerate(golds):
        p, r, f = _prf(frozenset(pred), frozenset(gold))
        if best is None or f > best.f1:
            best = BoundaryScore(p, r, f, k)
    return best


def boundary_f1(pred: LabeledSegmentation, golds: Sequence[LabeledSegmentation]) -> BoundaryScore:
    for g in golds:
        if g.word != pred.word:
            raise EvaluationError(f"gold {g.word!r} does not match prediction {pred.word!r}")
    return boundary_prf(pred.boundaries(), [g.boundaries() for g in golds])


@dataclass
class EvalReport:
    metrics: dict[str, float] = field(default_factory=dict)
    per_word: dict[str, dict] = field(default_factory=dict)
    tables: dict[str, dict] = field(default_factory=dict)

    def to_tsv(self) -> str:
        return "metric\tvalue\n" + "".join(f"{k}\t{v:.6f}\n" for k, v in self.metrics.items())

    def to_json(self) -> str:
        tables = {name: {"\t".join(k) if isinstance(k, tuple) else str(k): v
                         for k, v in t.items()} for name, t in self.tables.items()}
        return json.dumps({"metrics": self.metrics, "tables": tables}, indent=2,
                          ensure_ascii=False, sort_keys=True)


def _aligned(preds, dataset: Dataset) -> list[tuple[str, object, tuple]]:
    if isinstance(preds, Mapping):
        missing = [w for w in dataset.words if w not in preds]
        if missing:
            raise EvaluationError(f"no prediction for {len(missing)} words: {missing[:10]}")
        return [(w, preds[w], golds) for w, golds in dataset]
    preds = list(preds)
    if len(preds) != len(dataset):
        raise EvaluationError(f"{len(preds)} predictions for {len(dataset)} words")
    return [(w, p, golds) for p, (w, golds) in zip(preds, dataset)]


def macro_f1(preds, dataset: Dataset) -> EvalReport:
    rows = _aligned(preds, dataset)
    report = EvalReport()
    ps, rs, fs = [], [], []
    for word, pred, golds in rows:
        s = boundary_f1(pred, golds)
        report.per_word[word] = {"p": s.precision, "r": s.recall, "f1": s.f1}
        ps.append(s.precision)
        rs.append(s.recall)
        fs.append(s.f1)
    n = max(len(rows), 1)
    report.metrics.update(precision=sum(ps) / n, recall=sum(rs) / n, f1=sum(fs) / n)
    return report


def _views(ls: LabeledSegmentation, name: str):
    return derive_views(ls).require(name)


def stem_and_root_accuracy(preds, dataset: Dataset) -> tuple[float, float]:
    rows = _aligned(preds, dataset)
    root_hits = stem_hits = 0
    for _, pred, golds in rows:
        if label_granularity(pred) < 2:
            raise GranularityError("stemming and root detection need level >= 2 labels")
        roots, stem = _views(pred, "roots"), _views(pred, "stem")
        root_hits += any(_views(g, "roots") == roots for g in golds)
        stem_hits += any(_views(g, "stem") == stem for g in golds)
    n = max(len(rows), 1)
    return root_hits / n, stem_hits / n


def inflection_bundle(ls: LabeledSegmentation) -> list[str]:
    """Ordered feature names (level 4) or values (level 5) of inflectional segments."""
    return [t.components[-1] for t in ls.tags
            if t.kind == "INFL" and len(t.components) >= 4]


def _bundle(x) -> list[str]:
    if isinstance(x, LabeledSegmentation):
        return inflection_bundle(x)
    if isinstance(x, str):
        return [c for c in x.split(":") if c and c != "_"]
    return list(x)


def tag_classification_metrics(preds, dataset: Dataset) -> tuple[float, float]:
    """Full-bundle accuracy and macro F1 over individual inflectional features."""
    rows = _aligned(preds, dataset)
    correct = 0
    tp, fp, fn = Counter(), Counter(), Counter()
    gold_classes = set()
    for _, pred, golds in rows:
        pb = _bundle(pred)
        gbs = [_bundle(g) for g in golds]
        correct += any(pb == gb for gb in gbs)
        pc = Counter(pb)

        def overlap(gb):
            return sum((pc & Counter(gb)).values())

        gb = max(gbs, key=lambda b: (pb == b, overlap(b)))
        gc = Counter(gb)
        gold_classes.update(gc)
        for c in pc | gc:
            hit = min(pc[c], gc[c])
            tp[c] += hit
            fp[c] += pc[c] - hit
            fn[c] += gc[c] - hit
    f1s = []
    for c in sorted(gold_classes):
        denom = 2 * tp[c] + fp[c] + fn[c]
        f1s.append(2 * tp[c] / denom if denom else 0.0)
    n = max(len(rows), 1)
    return correct / n, (sum(f1s) / len(f1s) if f1s else 1.0)


def _matched_gold(pred: LabeledSegmentation, golds) -> LabeledSegmentation:
    return golds[boundary_f1(pred, golds).gold_index]


def undersegmentation_matrix(preds, dataset: Dataset, level: int) -> Counter:
    """Counts of adjacent gold tag pairs whose shared boundary the prediction missed."""
    counts: Counter = Counter()
    for _, pred, golds in _aligned(preds, dataset):
        gold = _matched_gold(pred, golds)
        predicted = pred.boundaries()
        spans = gold.spans()
        for (_, end, a), (_, _, b) in zip(spans, spans[1:]):
            if end not in predicted:
                counts[(str(project(a, level)), str(project(b, level)))] += 1
    return counts


def matrix_tsv(counts: Counter) -> str:
    lines = ["left\tright\tcount"]
    lines.extend(f"{a}\t{b}\t{n}" for (a, b), n in sorted(counts.items()))
    return "\n".join(lines) + "\n"


def _position_class(tag) -> str | None:
    if tag.position == "ROOT":
        return "ROOT"
    if tag.position in AFFIXES:
        return "AFFIX"
    return None


def morph_vocabulary(dataset: Dataset) -> tuple[set[str], set[str]]:
    roots, affixes = set(), set()
    for g in dataset.all_golds():
        for morph, tag in g.segments:
            cls = _position_class(tag)
            if cls == "ROOT":
                roots.add(morph)
            elif cls == "AFFIX":
                affixes.add(morph)
    return roots, affixes


def novel_morph_counts(preds, dataset: Dataset,
                       training_vocab: tuple[set[str], set[str]]) -> tuple[int, int]:
    """Distinct unseen root / affix types the prediction got right (span and class)."""
    seen_roots, seen_affixes = training_vocab
    roots, affixes = set(), set()
    for _, pred, golds in _aligned(preds, dataset):
        gold_items = {(i, j, _position_class(t)) for g in golds for i, j, t in g.spans()}
        for i, j, tag in pred.spans():
            cls = _position_class(tag)
            if cls is None or (i, j, cls) not in gold_items:
                continue
            morph = pred.word[i:j]
            if cls == "ROOT" and morph not in seen_roots:
                roots.add(morph)
            elif cls == "AFFIX" and morph not in seen_affixes:
                affixes.add(morph)
    return len(roots), len(affixes)
