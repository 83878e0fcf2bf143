import io

import pytest

from lmseg.corpus_io import load_corpus_text, serialize_corpus, split_dataset
from lmseg.morphotags import build_tagset
from lmseg.synth import (
    GrammarError,
    default_grammar,
    dump_grammar,
    generate,
    load_grammar,
    make_grammar,
    oracle_views,
    parse,
)

PLURAL = "SUFFIX:INFL:NOUN:NUMBER:PLURAL"
GENITIVE = "SUFFIX:INFL:NOUN:CASE:GENITIVE"


def tak_pol(seed=0):
    return make_grammar(
        [("ROOT:NOUN", "tak", 1.0), ("ROOT:NOUN", "pol", 1.0)],
        [(PLURAL, "ler", 0.25), (PLURAL, "lar", 0.25), (GENITIVE, "in", 0.5)],
        [("NUMBER", "CASE")], seed)


def test_tak_pol_words():
    # 2 roots x {-, ler, lar} x {-, in} is the whole language
    words = set(generate(tak_pol(), 12).words)
    assert len(words) == 12
    assert {"takler", "taklerin", "pol", "polin"} <= words
    assert "takinler" not in words
    assert parse(tak_pol(), "takinler") == []


def test_generation_is_deterministic():
    g = default_grammar(seed=3)
    assert generate(g, 300) == generate(g, 300)
    assert generate(g, 300, seed=1) != generate(g, 300, seed=2)


def test_generated_corpus_passes_validation():
    data = generate(default_grammar(), 400)
    assert load_corpus_text(serialize_corpus(data)) == data
    assert len(set(data.words)) == 400
    for _, golds in data:
        assert len(golds) == 1
        assert any(t.position == "ROOT" for t in golds[0].tags)


def test_order_constraints_hold():
    g = default_grammar(seed=1)
    for _, (gold,) in generate(g, 600):
        ranks = [g.feature_rank(t.components[3]) for t in gold.tags if t.kind == "INFL"]
        assert ranks == sorted(ranks) and len(set(ranks)) == len(ranks)
        kinds = [t.kind for t in gold.tags if t.position == "SUFFIX"]
        assert kinds == sorted(kinds, key=lambda k: k == "INFL")


def test_tagset_size_grows_with_level():
    data = generate(default_grammar(), 600)
    sizes = [len(build_tagset(data.all_golds(), level)) for level in range(6)]
    assert sizes == sorted(sizes)
    assert sizes[0] == 1


def test_inventory_too_small():
    with pytest.raises(GrammarError, match="inventory"):
        generate(tak_pol(), 13)


def test_oracle_views():
    g = tak_pol()
    takler = oracle_views(g, "takler")
    assert takler.analysis.serialize() == f"tak:ROOT:NOUN ler:{PLURAL}"
    pol = oracle_views(g, "pol")
    assert pol.views.roots == ["pol"] and pol.views.morph_tag == []
    assert oracle_views(g, "taklerin").views.morph_tag == ["PLURAL", "GENITIVE"]
    with pytest.raises(GrammarError):
        oracle_views(g, "kim")


def test_grammar_round_trip():
    g = default_grammar(seed=2)
    again = load_grammar(io.StringIO(dump_grammar(g)), seed=2)
    assert dump_grammar(again) == dump_grammar(g)
    assert generate(again, 100) == generate(g, 100)


def test_grammar_file_errors():
    with pytest.raises(GrammarError):
        load_grammar(io.StringIO("suffix\tSUFFIX:INFL:NOUN\tler\t1\n"))
    with pytest.raises(ValueError, match="line 1"):
        load_grammar(io.StringIO("stem\tROOT\ttak\t1\n"))


def test_standard_split_sizes():
    data = generate(default_grammar(), 1200)
    assert [len(p) for p in split_dataset(data, [8, 1, 1, 2], seed=0)] == [800, 100, 100, 200]
