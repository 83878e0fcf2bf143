import numpy as np
import pytest
from scipy.optimize import minimize

from lmseg.baselines import (
    CONTINUE,
    EMPTY_TAG,
    MaxEntConfig,
    char_crf_mode,
    char_examples,
    char_labels,
    char_ngrams,
    char_predict,
    fit_char_crf,
    full_tag,
    maxent_objective,
    maxent_predict,
    maxent_train,
    merge_chars,
)
from lmseg.corpus_io import load_corpus_text
from lmseg.features import FeatureConfig, Resources
from lmseg.morphotags import LabeledSegmentation
from lmseg.optim import owlqn, pseudo_gradient
from lmseg.semicrf import forward, viterbi
from lmseg.training import TrainConfig, prepare_model
from oracles import linear_chain_log_partition, random_word

CORPUS = load_corpus_text(
    "takler\ttak:ROOT ler:SUFFIX\n"
    "polin\tpol:ROOT in:SUFFIX\n"
    "kim\tkim:ROOT\n"
)


# optimizer

def _lasso_problem(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(30, 12))
    b = rng.normal(size=30)

    def fun(x):
        r = A @ x - b
        return 0.5 * float(r @ r), A.T @ r

    return fun


def _split_variable_oracle(fun, n, l1):
    # min f(u - v) + l1 * sum(u + v) with u, v >= 0
    def wrapped(z):
        u, v = z[:n], z[n:]
        f, g = fun(u - v)
        return f + l1 * z.sum(), np.concatenate([g + l1, -g + l1])

    res = minimize(wrapped, np.zeros(2 * n), jac=True, method="L-BFGS-B",
                   bounds=[(0, None)] * (2 * n),
                   options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 5000})
    return res.fun, res.x[:n] - res.x[n:]


@pytest.mark.parametrize("seed", range(4))
def test_owlqn_matches_bound_constrained_oracle(seed):
    fun = _lasso_problem(seed)
    l1 = 2.0
    ours = owlqn(fun, np.zeros(12), l1, tolerance=1e-14, max_iterations=2000)
    ref_value, ref_x = _split_variable_oracle(fun, 12, l1)
    assert ours.fun == pytest.approx(ref_value, rel=1e-6)
    assert np.allclose(ours.x, ref_x, atol=1e-4)


def test_owlqn_produces_exact_zeros():
    fun = _lasso_problem(0)
    res = owlqn(fun, np.zeros(12), 25.0, tolerance=1e-12)
    assert np.sum(res.x == 0.0) > 0


def test_owlqn_without_penalty_is_least_squares():
    fun = _lasso_problem(1)
    res = owlqn(fun, np.zeros(12), 0.0, tolerance=1e-15, max_iterations=1000)
    rng = np.random.default_rng(1)
    A = rng.normal(size=(30, 12))
    b = rng.normal(size=30)
    assert np.allclose(res.x, np.linalg.lstsq(A, b, rcond=None)[0], atol=1e-5)


def test_pseudo_gradient_at_zero():
    x = np.array([0.0, 0.0, 0.0, 1.0])
    g = np.array([-3.0, 3.0, 0.5, 0.5])
    assert np.allclose(pseudo_gradient(x, g, 1.0), [-2.0, 2.0, 0.0, 1.5])


# character CRF

def test_char_mode_sets_unit_segments():
    cfg = char_crf_mode(TrainConfig(level=2))
    assert cfg.max_segment_length == 1 and cfg.level == 2


def test_char_mode_reduces_to_linear_chain():
    rng = np.random.default_rng(0)
    cfg = char_crf_mode(TrainConfig(level=1, features=FeatureConfig(max_context_ngram=2)))
    for _ in range(10):
        w = random_word(rng, 7)
        data = load_corpus_text(f"{w}\t{w[0]}:ROOT" + (f" {w[1:]}:SUFFIX" if len(w) > 1 else "")
                                + "\n")
        examples = char_examples(data, 1)
        labels = ["ROOT", "ROOT" + CONTINUE, "SUFFIX", "SUFFIX" + CONTINUE]
        model, _ = prepare_model(data, cfg, Resources(), labels, examples)
        model = model.with_weights(rng.uniform(-2, 2, len(model.vocab)))
        assert forward(model, w).logZ == pytest.approx(linear_chain_log_partition(model, w),
                                                       abs=1e-8)


def test_char_viterbi_segments_are_single_letters():
    model = fit_char_crf(CORPUS, TrainConfig(level=1, l2=0.1))
    out = viterbi(model, "takler")
    assert all(b - a == 1 for a, b in zip((0,) + out.ends[:-1], out.ends))


def test_char_crf_learns_training_words():
    model = fit_char_crf(CORPUS, TrainConfig(level=1, l2=0.01))
    for word, golds in CORPUS:
        assert char_predict(model, word) == golds[0]


def test_merge_chars_rebuilds_segments():
    labels = ["ROOT", "ROOT~I", "ROOT~I", "SUFFIX", "SUFFIX~I", "SUFFIX~I"]
    merged = merge_chars("takler", labels)
    assert merged == LabeledSegmentation.from_pairs([("tak", "ROOT"), ("ler", "SUFFIX")])
    spans = [(0, 3, "ROOT"), (3, 6, "SUFFIX")]
    assert [lab for _, _, lab in char_labels(spans)] == labels


def test_merge_chars_orphan_continuation_starts_segment():
    merged = merge_chars("ab", ["ROOT", "SUFFIX~I"])
    assert merged.morphs == ["a", "b"]


# MaxEnt

def test_char_ngrams_mark_edges():
    assert char_ngrams("ab", 2) == ["^a", "a", "ab", "b", "b$"]


def test_full_tag_serialization():
    ls = LabeledSegmentation.from_pairs([
        ("genç", "ROOT:ADJ"), ("leş", "SUFFIX:DERIV:VERB"), ("me", "SUFFIX:DERIV:NOUN"),
        ("ler", "SUFFIX:INFL:NOUN:NUMBER:PLURAL"), ("in", "SUFFIX:INFL:NOUN:CASE:GENITIVE")])
    assert full_tag(ls) == "PLURAL:GENITIVE"
    assert full_tag(ls, 4) == "NUMBER:CASE"
    assert full_tag(LabeledSegmentation.from_pairs([("ev", "ROOT")])) == EMPTY_TAG


@pytest.mark.parametrize("reg", ["L1", "L2"])
def test_separable_words_are_learned(reg):
    data = [("abc", "PLURAL"), ("xyz", "GENITIVE")]
    clf = maxent_train(data, MaxEntConfig(max_ngram=2, regularizer=reg, coefficient=0.01))
    assert [maxent_predict(clf, w) for w, _ in data] == ["PLURAL", "GENITIVE"]


def test_unseen_ngrams_fall_back_to_prior():
    data = [("ab", "A"), ("ba", "A"), ("aa", "A"), ("bb", "B")]
    clf = maxent_train(data, MaxEntConfig(max_ngram=2, coefficient=0.5))
    assert maxent_predict(clf, "zzz") == "A"


def test_split_mode_never_has_fewer_parameters():
    data = [("ab", "PLURAL:GENITIVE"), ("ba", "PLURAL"), ("bb", EMPTY_TAG)]
    plain = maxent_train(data, MaxEntConfig(max_ngram=2))
    split = maxent_train(data, MaxEntConfig(max_ngram=2, split_mode=True))
    assert split.n_parameters >= plain.n_parameters
    assert "PART:GENITIVE" in split.parts


def test_different_seeds_reach_the_same_objective():
    data = [("takler", "PLURAL"), ("polin", "GENITIVE"), ("taklerin", "PLURAL:GENITIVE"),
            ("kim", EMPTY_TAG), ("kimler", "PLURAL")]
    objs = []
    for seed in (0, 1):
        cfg = MaxEntConfig(max_ngram=3, coefficient=0.3, seed=seed, tolerance=1e-12,
                           max_iterations=3000)
        objs.append(maxent_objective(maxent_train(data, cfg), data))
    assert abs(objs[0] - objs[1]) <= 1e-4 * abs(objs[0])


def test_word_without_tag_is_rejected():
    with pytest.raises(ValueError, match="ab"):
        maxent_train([("ab", "")], MaxEntConfig())


def test_config_validation():
    with pytest.raises(ValueError):
        MaxEntConfig(max_ngram=0)
    with pytest.raises(ValueError):
        MaxEntConfig(coefficient=-1)
