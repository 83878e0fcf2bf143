import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from lmseg.corpus_io import Dataset
from lmseg.evaluation import (
    EvaluationError,
    boundary_f1,
    boundary_prf,
    macro_f1,
    matrix_tsv,
    morph_vocabulary,
    novel_morph_counts,
    stem_and_root_accuracy,
    tag_classification_metrics,
    undersegmentation_matrix,
)
from lmseg.morphotags import GranularityError, LabeledSegmentation

TURKISH_PAIRS = [
    ("genç", "ROOT:ADJ"),
    ("leş", "SUFFIX:DERIV:VERB"),
    ("me", "SUFFIX:DERIV:NOUN"),
    ("ler", "SUFFIX:INFL:NOUN:NUMBER:PLURAL"),
    ("in", "SUFFIX:INFL:NOUN:CASE:GENITIVE"),
]
TURKISH = LabeledSegmentation.from_pairs(TURKISH_PAIRS)
GERMAN = LabeledSegmentation.from_pairs([
    ("auf", "PREFIX:DERIV:VERB"), ("ge", "PREFIX:INFL:VERB"),
    ("schrieb", "ROOT:VERB"), ("en", "SUFFIX:INFL:VERB"),
])


def ls(*pairs):
    return LabeledSegmentation.from_pairs(pairs)


def dataset(*entries):
    return Dataset(tuple((g[0].word, tuple(g)) for g in entries), "TEST")


def test_partial_overlap_is_one_half():
    s = boundary_prf(frozenset({2, 4}), [frozenset({2, 5})])
    assert (s.precision, s.recall, s.f1) == (0.5, 0.5, 0.5)


def test_empty_conventions():
    assert boundary_prf(frozenset(), [frozenset()]).f1 == 1.0
    one_sided = boundary_prf(frozenset({1}), [frozenset()])
    assert (one_sided.precision, one_sided.recall, one_sided.f1) == (0.0, 0.0, 0.0)
    other = boundary_prf(frozenset(), [frozenset({1})])
    assert (other.precision, other.recall, other.f1) == (0.0, 0.0, 0.0)


def test_identical_prediction_scores_one():
    s = boundary_f1(TURKISH, [TURKISH])
    assert (s.precision, s.recall, s.f1) == (1.0, 1.0, 1.0)


def test_max_over_golds():
    pred = ls(("abc", "SEGMENT"), ("d", "SEGMENT"))
    g1 = ls(("ab", "SEGMENT"), ("cd", "SEGMENT"))
    g2 = ls(("abc", "SEGMENT"), ("d", "SEGMENT"))
    s = boundary_f1(pred, [g1, g2])
    assert s.f1 == 1.0 and s.gold_index == 1


def test_word_mismatch_is_an_error():
    with pytest.raises(EvaluationError):
        boundary_f1(ls(("ab", "ROOT")), [ls(("ac", "ROOT"))])


boundaries = st.frozensets(st.integers(1, 7))


@given(boundaries, st.lists(boundaries, min_size=1, max_size=3), boundaries)
def test_adding_a_gold_never_hurts(pred, golds, extra):
    assert boundary_prf(pred, golds + [extra]).f1 >= boundary_prf(pred, golds).f1


@given(boundaries, boundaries)
def test_scores_are_rates(pred, gold):
    s = boundary_prf(pred, [gold])
    assert 0 <= s.precision <= 1 and 0 <= s.recall <= 1 and 0 <= s.f1 <= 1


def test_f1_ignores_label_level():
    pred = ls(("genç", "ROOT"), ("leşme", "SUFFIX"), ("lerin", "SUFFIX"))
    assert boundary_f1(pred, [TURKISH]).f1 == boundary_f1(pred.project(0), [TURKISH]).f1


def test_macro_average():
    a = ls(("ab", "ROOT"))
    b = ls(("c", "ROOT"), ("d", "SUFFIX"))
    gold = dataset([a], [b])
    report = macro_f1([a, ls(("cd", "ROOT"))], gold)
    assert report.metrics["f1"] == 0.5
    assert macro_f1([a, b], gold).metrics == {"precision": 1.0, "recall": 1.0, "f1": 1.0}


def test_missing_prediction_lists_words():
    gold = dataset([ls(("ab", "ROOT"))], [ls(("cd", "ROOT"))])
    with pytest.raises(EvaluationError, match="cd"):
        macro_f1({"ab": ls(("ab", "ROOT"))}, gold)


def test_turkish_stem_and_root():
    assert stem_and_root_accuracy([TURKISH], dataset([TURKISH])) == (1.0, 1.0)


def test_merged_root_misses_root():
    pred = ls(("gençleş", "ROOT:ADJ"), ("me", "SUFFIX:DERIV:NOUN"),
              ("ler", "SUFFIX:INFL:NOUN:NUMBER:PLURAL"), ("in", "SUFFIX:INFL:NOUN:CASE:GENITIVE"))
    root_acc, stem_acc = stem_and_root_accuracy([pred], dataset([TURKISH]))
    assert root_acc == 0.0 and stem_acc == 1.0


def test_german_root_and_stem():
    from lmseg.morphotags import derive_views
    v = derive_views(GERMAN)
    assert v.roots == ["schrieb"] and v.stem == "aufschrieb"
    assert stem_and_root_accuracy([GERMAN], dataset([GERMAN])) == (1.0, 1.0)


def test_stem_needs_level_two():
    with pytest.raises(GranularityError):
        stem_and_root_accuracy([TURKISH.project(1)], dataset([TURKISH]))


def test_tag_bundle_exact_match():
    acc, f1 = tag_classification_metrics([TURKISH], dataset([TURKISH]))
    assert (acc, f1) == (1.0, 1.0)
    assert tag_classification_metrics(["PLURAL:GENITIVE"], dataset([TURKISH])) == (1.0, 1.0)


def test_tag_partial_bundle():
    pred = ls(("gençleşme", "SEGMENT"), ("lerin", "SUFFIX:INFL:NOUN:NUMBER:PLURAL"))
    acc, f1 = tag_classification_metrics([pred], dataset([TURKISH]))
    # PLURAL: tp 1 -> F1 1; GENITIVE: fn 1 -> F1 0
    assert acc == 0.0 and f1 == 0.5


def test_uninflected_word_counts_as_correct():
    word = ls(("ev", "ROOT:NOUN"))
    assert tag_classification_metrics([ls(("ev", "SEGMENT"))], dataset([word]))[0] == 1.0


def test_undersegmentation_trace():
    pred = ls(("gençleşme", "ROOT"), ("ler", "SUFFIX"), ("in", "SUFFIX"))
    counts = undersegmentation_matrix([pred], dataset([TURKISH]), 1)
    assert counts == {("ROOT", "SUFFIX"): 1, ("SUFFIX", "SUFFIX"): 1}
    assert "ROOT\tSUFFIX\t1" in matrix_tsv(counts)


def test_undersegmentation_perfect_and_single_miss():
    assert not undersegmentation_matrix([TURKISH], dataset([TURKISH]), 2)
    pred = ls(("gençleş", "ROOT"), ("me", "SUFFIX"), ("ler", "SUFFIX"), ("in", "SUFFIX"))
    counts = undersegmentation_matrix([pred], dataset([TURKISH]), 2)
    assert counts == {("ROOT", "SUFFIX:DERIV"): 1}


def test_undersegmentation_total_equals_missed_boundaries():
    pred = ls(("gen", "ROOT"), ("çleşmel", "SUFFIX"), ("erin", "SUFFIX"))
    counts = undersegmentation_matrix([pred], dataset([TURKISH]), 3)
    missed = TURKISH.boundaries() - pred.boundaries()
    assert sum(counts.values()) == len(missed)


def test_novel_roots_found_once_per_type():
    train = dataset([ls(("home", "ROOT"), ("s", "SUFFIX"))])
    hw = ls(("home", "ROOT"), ("work", "ROOT"))
    hws = ls(("home", "ROOT"), ("work", "ROOT"), ("s", "SUFFIX"))
    test = dataset([hw], [hws], [ls(("work", "ROOT"))])
    vocab = morph_vocabulary(train)
    assert novel_morph_counts([hw, hws, ls(("work", "ROOT"))], test, vocab) == (1, 0)
    assert novel_morph_counts([ls(("home", "ROOT"), ("s", "SUFFIX"))],
                              dataset([ls(("home", "ROOT"), ("s", "SUFFIX"))]), vocab) == (0, 0)


def test_report_serialization():
    report = macro_f1([TURKISH], dataset([TURKISH]))
    report.tables["undersegmentation"] = {("ROOT", "SUFFIX"): 2}
    lines = report.to_tsv().splitlines()
    assert lines[0] == "metric\tvalue" and lines[-1] == "f1\t1.000000"
    parsed = json.loads(report.to_json())
    assert parsed["metrics"]["f1"] == 1.0
    assert parsed["tables"]["undersegmentation"] == {"ROOT\tSUFFIX": 2}
