import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lmseg.corpus_io import AffixGazetteer, DictionarySet
from lmseg.features import (
    FeatureConfig,
    FeatureVocabulary,
    Resources,
    SparseVector,
    build_lsv,
    conjunction_features,
    context_ngram_features,
    dictionary_features,
    featurize,
    featurize_strings,
    gazetteer_features,
    lsv_features,
    span_base_features,
)

INDONESIAN = AffixGazetteer(frozenset(), frozenset({"kau", "an", "nya", "ku", "mu"}))
ZULU = AffixGazetteer(frozenset({"i", "u", "za"}), frozenset())


def test_left_context():
    assert context_ngram_features("sees", 2, "L", 2) == ["CTX:L:1:e", "CTX:L:2:se"]


def test_left_context_at_word_start_uses_sentinel():
    assert context_ngram_features("sees", 0, "L", 1) == ["CTX:L:1:⊥"]


def test_right_context_talking():
    assert context_ngram_features("talking", 4, "R", 3) == [
        "CTX:R:1:i", "CTX:R:2:in", "CTX:R:3:ing"]


def test_right_context_at_word_end():
    assert context_ngram_features("ab", 2, "R", 2) == ["CTX:R:1:⊤", "CTX:R:2:⊤⊤"]


def test_context_rejects_bad_boundary():
    with pytest.raises(ValueError):
        context_ngram_features("ab", 3, "L", 1)


def test_gazetteer_lookup():
    assert gazetteer_features("an", INDONESIAN) == ["GAZ:SUF"]
    assert gazetteer_features("za", ZULU) == ["GAZ:PRE"]
    assert gazetteer_features("xyz", INDONESIAN) == []


def test_dictionary_lookup():
    d = DictionarySet(frozenset({"home", "work"}))
    assert dictionary_features("home", d) == ["DICT:HIT", "DICT:LEN:4"]
    assert dictionary_features("work", d) == ["DICT:HIT", "DICT:LEN:4"]
    assert dictionary_features("se", d) == []
    assert dictionary_features("homeworks", DictionarySet(frozenset({"homeworks"})))[1] == \
        "DICT:LEN:5+"


def test_segment_tag_conjunction():
    tag = "SUFFIX:INFL:NOUN:NUMBER:PLURAL"
    assert conjunction_features("ler", tag) == [f"SEGTAG:{tag}:ler"]
    assert conjunction_features("lar", tag) == [f"SEGTAG:{tag}:lar"]


def test_unseen_conjunction_dropped_when_frozen():
    vocab = FeatureVocabulary(["SEGTAG:ROOT:a"]).freeze()
    assert vocab.add("SEGTAG:ROOT:b") is None
    assert len(vocab) == 1


def test_successor_variety():
    table = build_lsv(["talked", "talks", "talking"])
    assert table.successor_variety("talk") == 3
    assert build_lsv(["aaa"]).successor_variety("aa") == 1
    feats = lsv_features("ab", 1, build_lsv(["ab", "ac", "ad"]), (2, 3))
    assert [f for f in feats if f.startswith("LSV:S")] == ["LSV:S:≥2", "LSV:S:≥3"]


def test_predecessor_variety_mirrors():
    table = build_lsv(["xing", "ying", "zing"])
    assert table.predecessor_variety("ing") == 3


def test_level_zero_single_letter_transition():
    cfg = FeatureConfig(max_context_ngram=1)
    feats = featurize_strings("a", (0, 1), "SEGMENT", "BEGIN", cfg, Resources())
    assert "TRANS:BEGIN:SEGMENT" in feats


def test_featurize_turkish_span():
    word = "gençleşmelerin"
    lab = "SUFFIX:INFL:NOUN:NUMBER:PLURAL"
    feats = featurize_strings(word, (9, 12), lab, "SUFFIX:DERIV:NOUN", FeatureConfig(),
                              Resources())
    assert f"SEGTAG:{lab}:ler" in feats
    assert f"TRANS:SUFFIX:DERIV:NOUN:{lab}" in feats
    assert f"S:CTX:L:2:me@{lab}" in feats and f"E:CTX:R:2:in@{lab}" in feats


def test_featurize_is_deterministic_and_binary():
    cfg = FeatureConfig(use_affix=True, use_dict=True)
    res = Resources(gazetteer=INDONESIAN, dictionary=DictionarySet(frozenset({"mak"})))
    vocab = FeatureVocabulary()
    a = featurize("makan", (3, 5), "SUFFIX", "ROOT", cfg, res, vocab)
    b = featurize("makan", (3, 5), "SUFFIX", "ROOT", cfg, res, vocab)
    assert np.array_equal(a.indices, b.indices)
    assert np.all(a.values == 1.0)
    size = len(vocab)
    vocab.freeze()
    featurize("other", (0, 2), "SUFFIX", "ROOT", cfg, res, vocab)
    assert len(vocab) == size


def test_sparse_vector_rejects_duplicates():
    with pytest.raises(ValueError):
        SparseVector(np.array([1, 1]), np.ones(2))


def test_span_out_of_range():
    with pytest.raises(ValueError):
        span_base_features("ab", 1, 3, FeatureConfig(), Resources())


@given(st.text("abc", min_size=1, max_size=6), st.data())
def test_changing_label_changes_strings_not_families(word, data):
    i = data.draw(st.integers(0, len(word) - 1))
    j = data.draw(st.integers(i + 1, len(word)))
    cfg = FeatureConfig(max_context_ngram=2)
    a = featurize_strings(word, (i, j), "ROOT", "BEGIN", cfg, Resources())
    b = featurize_strings(word, (i, j), "SUFFIX", "BEGIN", cfg, Resources())
    assert len(a) == len(b)
    assert not set(a) & set(b)

    def family(s):
        return s.split(":")[0] if not s.startswith(("S:", "E:")) else s[:6]

    assert sorted(map(family, a)) == sorted(map(family, b))


def test_fingerprints_track_resource_content():
    a = Resources(dictionary=DictionarySet(frozenset({"x"})))
    b = Resources(dictionary=DictionarySet(frozenset({"y"})))
    assert a.fingerprints()["dictionary"] != b.fingerprints()["dictionary"]
    assert Resources().fingerprints() == {}
