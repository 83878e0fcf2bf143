"""Exact inference for a first-order semi-Markov CRF over labeled segmentations.

The log-potential of a segment ``word[i:j]`` with label ``l`` following
label ``l'`` factorizes into an emission part (label-conjoined segment
features) and a transition part::

    phi(i, j, l', l) = U[i, j - i, l] + T[l', l]

Segments that start the word take their transition from the reserved
``BEGIN`` label.  All recursions are in log space; a batch of words is
padded to the longest word and processed together.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import logsumexp

from .features import (
    BEGIN,
    FeatureConfig,
    FeatureVocabulary,
    Resources,
    SparseVector,
    featurize,
    span_base_features,
    transition_feature,
)
from .morphotags import LabeledSegmentation, Tagset, parse_tag

NEG_INF = -np.inf


class InferenceError(ValueError):
    pass


class SegmentTooLong(InferenceError):
    pass


@dataclass
class Model:
    labels: tuple[str, ...]
    vocab: FeatureVocabulary
    weights: np.ndarray
    config: FeatureConfig = field(default_factory=FeatureConfig)
    max_segment_length: int | None = 12
    level: int | None = None
    resources: Resources = field(default_factory=Resources)
    fingerprints: dict = field(default_factory=dict)
    train_config: dict = field(default_factory=dict)

    def __post_init__(self):
        self.labels = tuple(self.labels)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if len(self.weights) != len(self.vocab):
            raise ValueError(
                f"{len(self.weights)} weights for {len(self.vocab)} features"
            )
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")
        self.vocab.freeze()
        self._index = None

    @property
    def n_labels(self) -> int:
        return len(self.labels)

    @property
    def tagset(self) -> Tagset:
        return Tagset(self.level if self.level is not None else 5,
                      tuple(parse_tag(l) for l in self.labels))

    @property
    def index(self) -> "FeatureIndex":
        if self._index is None or self._index.n_params != len(self.vocab):
            self._index = FeatureIndex(self.labels, self.vocab)
        return self._index

    def with_weights(self, weights: np.ndarray) -> "Model":
        m = Model(self.labels, self.vocab, weights, self.config, self.max_segment_length,
                  self.level, self.resources, dict(self.fingerprints), dict(self.train_config))
        m._index = self._index
        return m

    def label_index(self, label) -> int:
        try:
            return self.labels.index(str(label))
        except ValueError:
            raise InferenceError(f"label {label} is not in the model's tagset") from None


class FeatureIndex:
    """Maps vocabulary entries onto an emission matrix (base feature x label)
    and a transition matrix ((labels + BEGIN) x label)."""

    def __init__(self, labels: Sequence[str], vocab: FeatureVocabulary):
        self.labels = tuple(labels)
        L = len(self.labels)
        self.n_params = len(vocab)
        label_pos = {l: k for k, l in enumerate(self.labels)}
        prevs = list(self.labels) + [BEGIN]
        trans_strings = {
            transition_feature(p, l): (a, b)
            for a, p in enumerate(prevs) for b, l in enumerate(self.labels)
        }
        # longest label first, so SEGTAG parsing prefers the deepest tag
        segtag_prefixes = sorted(
            ((f"SEGTAG:{l}:", k) for k, l in enumerate(self.labels)),
            key=lambda x: -len(x[0]),
        )
        self.trans_param = np.full((L + 1, L), -1, dtype=np.int64)
        self.base_index: dict[str, int] = {}
        rows, cols, params = [], [], []
        for s, idx in vocab._index.items():
            if s in trans_strings:
                a, b = trans_strings[s]
                self.trans_param[a, b] = idx
                continue
            base = col = None
            if s.startswith("SEGTAG:"):
                for prefix, k in segtag_prefixes:
                    if s.startswith(prefix) and len(s) > len(prefix):
                        base, col = "SEG:" + s[len(prefix):], k
                        break
            else:
                base, sep, label = s.rpartition("@")
                col = label_pos.get(label) if sep else None
            if col is None:
                continue  # features for labels outside this model
            row = self.base_index.setdefault(base, len(self.base_index))
            rows.append(row)
            cols.append(col)
            params.append(idx)
        self.emit_row = np.array(rows, dtype=np.int64)
        self.emit_col = np.array(cols, dtype=np.int64)
        self.emit_param = np.array(params, dtype=np.int64)
        self.n_base = len(self.base_index)
        tmask = self.trans_param >= 0
        self._trans_mask = tmask
        self._trans_idx = self.trans_param[tmask]

    @property
    def n_labels(self) -> int:
        return len(self.labels)

    def emission_matrix(self, weights: np.ndarray) -> np.ndarray:
        W = np.zeros((self.n_base, self.n_labels))
        W[self.emit_row, self.emit_col] = weights[self.emit_param]
        return W

    def transition_matrix(self, weights: np.ndarray) -> np.ndarray:
        T = np.zeros((self.n_labels + 1, self.n_labels))
        T[self._trans_mask] = weights[self._trans_idx]
        return T

    def scatter(self, emit_counts: np.ndarray, trans_counts: np.ndarray) -> np.ndarray:
        """Fold (base x label) and (prev x label) count matrices into a parameter vector."""
        g = np.zeros(self.n_params)
        if len(self.emit_param):
            g[self.emit_param] = emit_counts[self.emit_row, self.emit_col]
        g[self._trans_idx] += trans_counts[self._trans_mask]
        return g


@dataclass
class WordFeatures:
    """Candidate spans of one word and their base-feature incidence rows."""

    word: str
    m: int
    starts: np.ndarray
    lengths: np.ndarray
    matrix: sp.csr_matrix  # n_spans x n_base, binary

    @property
    def n(self) -> int:
        return len(self.word)

    def span_row(self, start: int, end: int) -> int:
        # spans are enumerated start-major, then by length
        before = int(np.sum(np.minimum(self.m, self.n - np.arange(start))))
        return before + (end - start - 1)


def effective_m(max_segment_length: int | None, n: int) -> int:
    return n if max_segment_length is None else max(1, min(max_segment_length, n))


def encode_word(word: str, index: FeatureIndex, config: FeatureConfig,
                resources: Resources, max_segment_length: int | None) -> WordFeatures:
    n = len(word)
    if n < 1:
        raise InferenceError("cannot segment an empty word")
    m = effective_m(max_segment_length, n)
    starts, lengths, indptr, cols = [], [], [0], []
    base_index = index.base_index
    for i in range(n):
        for length in range(1, min(m, n - i) + 1):
            rows = {base_index[b] for b in span_base_features(word, i, i + length, config, resources)
                    if b in base_index}
            cols.extend(sorted(rows))
            indptr.append(len(cols))
            starts.append(i)
            lengths.append(length)
    data = np.ones(len(cols))
    mat = sp.csr_matrix((data, np.array(cols, dtype=np.int64), np.array(indptr)),
                        shape=(len(starts), index.n_base))
    return WordFeatures(word, m, np.array(starts), np.array(lengths), mat)


class Batch:
    """Stacked span incidence of several words, reusable across weight vectors."""

    def __init__(self, words: Sequence[WordFeatures]):
        self.words = list(words)
        self.B = len(self.words)
        self.N = np.array([w.n for w in self.words])
        self.Nmax = int(self.N.max())
        self.m = max(w.m for w in self.words)
        self.b = np.concatenate([np.full(len(w.starts), k) for k, w in enumerate(self.words)])
        self.i = np.concatenate([w.starts for w in self.words])
        self.l = np.concatenate([w.lengths for w in self.words]) - 1
        self.S = sp.vstack([w.matrix for w in self.words], format="csr")
        self.ST = self.S.T.tocsr()


class Lattice:
    """Padded batch of words with emission potentials U[b, i, len-1, l]."""

    def __init__(self, batch: Batch | Sequence[WordFeatures], index: FeatureIndex,
                 weights: np.ndarray):
        if not isinstance(batch, Batch):
            batch = Batch(batch)
        self.batch = batch
        self.index = index
        L = index.n_labels
        self.B, self.N, self.Nmax, self.m = batch.B, batch.N, batch.Nmax, batch.m
        self.T = index.transition_matrix(weights)
        U = np.full((self.B, self.Nmax + 1, self.m, L), NEG_INF)
        U[batch.b, batch.i, batch.l] = batch.S @ index.emission_matrix(weights)
        self.U = U
        self._forward()
        self._backward()

    def _forward(self):
        B, Nmax, m, T = self.B, self.Nmax, self.m, self.T
        L = T.shape[1]
        alpha = np.full((B, Nmax + 1, L), NEG_INF)
        alpha[:, 0, :] = 0.0
        # A[b, i, l]: log-sum over the label before position i, transition included
        A = np.full((B, Nmax + 1, L), NEG_INF)
        A[:, 0, :] = T[L]
        for j in range(1, Nmax + 1):
            lens = np.arange(1, min(m, j) + 1)
            i = j - lens
            terms = A[:, i, :] + self.U[:, i, lens - 1, :]
            alpha[:, j, :] = logsumexp(terms, axis=1)
            A[:, j, :] = logsumexp(alpha[:, j, :, None] + T[None, :L, :], axis=1)
        self.alpha, self.A = alpha, A
        self.logZ = logsumexp(alpha[np.arange(B), self.N, :], axis=1)

    def _backward(self):
        B, Nmax, m, T = self.B, self.Nmax, self.m, self.T
        L = T.shape[1]
        beta = np.full((B, Nmax + 1, L), NEG_INF)
        # C[b, i, l]: log-sum over segments labeled l starting at i and their futures
        C = np.full((B, Nmax + 1, L), NEG_INF)
        ends = self.N
        for n in range(Nmax, -1, -1):
            lens = np.arange(1, min(m, Nmax - n) + 1)
            if len(lens):
                C[:, n, :] = logsumexp(self.U[:, n, lens - 1, :] + beta[:, n + lens, :], axis=1)
            if n > 0:
                beta[:, n, :] = logsumexp(T[None, :L, :] + C[:, n, None, :], axis=2)
            beta[ends == n, n, :] = 0.0
        self.beta, self.C = beta, C
        self.logZ_beta = logsumexp(T[L][None, :] + C[:, 0, :], axis=1)

    def span_marginals(self) -> np.ndarray:
        """P[b, i, len-1, l]: posterior of a segment word[i:i+len] labeled l."""
        Nmax, m = self.Nmax, self.m
        P = np.zeros_like(self.U)
        z = self.logZ[:, None, None]
        for length in range(1, m + 1):
            i = np.arange(0, Nmax + 1 - length)
            val = self.A[:, i, :] + self.U[:, i, length - 1, :] + self.beta[:, i + length, :] - z
            P[:, i, length - 1, :] = np.exp(val)
        return P

    def transition_marginals(self) -> np.ndarray:
        """E[prev, l]: expected count of each transition, BEGIN as the last row."""
        L = self.T.shape[1]
        z = self.logZ[:, None, None]
        inner = (self.alpha[:, 1:, :, None] + self.T[None, None, :L, :]
                 + self.C[:, 1:, None, :] - z[:, :, :, None])
        E = np.zeros((L + 1, L))
        E[:L] = np.exp(inner).sum(axis=(0, 1))
        E[L] = np.exp(self.T[L][None, :] + self.C[:, 0, :] - self.logZ[:, None]).sum(axis=0)
        return E

    def expected_counts(self) -> np.ndarray:
        P = self.span_marginals()
        b = self.batch
        emit = np.asarray(b.ST @ P[b.b, b.i, b.l])
        return self.index.scatter(emit, self.transition_marginals())


@dataclass
class Chart:
    """Lattice of a single word."""

    word: str
    labels: tuple[str, ...]
    m: int
    U: np.ndarray       # (N + 1, m, L), -inf where the span is out of range
    T: np.ndarray       # (L + 1, L), BEGIN is the last row
    alpha: np.ndarray   # (N + 1, L)
    beta: np.ndarray    # (N + 1, L)
    logZ: float
    logZ_beta: float
    _lattice: Lattice = field(repr=False, default=None)

    @property
    def n(self) -> int:
        return len(self.word)

    @property
    def n_labels(self) -> int:
        return len(self.labels)

    def log_potential(self, start: int, end: int, prev: int | None, label: int) -> float:
        """phi for segment [start, end) with label index ``label``; ``prev`` None means BEGIN."""
        if start == 0:
            if prev is not None:
                return NEG_INF
            prev = self.n_labels
        elif prev is None:
            return NEG_INF
        if not 1 <= end - start <= self.m:
            return NEG_INF
        return float(self.U[start, end - start - 1, label] + self.T[prev, label])


def _lattice_for(model: Model, words: Sequence[str]) -> Lattice:
    idx = model.index
    feats = [encode_word(w, idx, model.config, model.resources, model.max_segment_length)
             for w in words]
    return Lattice(feats, idx, model.weights)


def _chart(model: Model, word: str) -> Chart:
    lat = _lattice_for(model, [word])
    n = len(word)
    return Chart(word, model.labels, lat.m, lat.U[0, : n + 1], lat.T,
                 lat.alpha[0, : n + 1], lat.beta[0, : n + 1], float(lat.logZ[0]),
                 float(lat.logZ_beta[0]), lat)


def forward(model: Model, word: str) -> Chart:
    return _chart(model, word)


def backward(model: Model, word: str) -> Chart:
    return _chart(model, word)


def log_partition(model: Model, word: str) -> float:
    return _chart(model, word).logZ


@dataclass
class Marginals:
    word: str
    labels: tuple[str, ...]
    span: np.ndarray   # (N, m, L): p(word[i:i+len] labeled l)
    edge: dict         # (i, j, prev, l) -> p, prev None for BEGIN

    def segment(self, start: int, end: int, label: int) -> float:
        return float(self.span[start, end - start - 1, label])


def marginals(model: Model, word: str) -> Marginals:
    chart = _chart(model, word)
    lat = chart._lattice
    n, L = chart.n, chart.n_labels
    P = lat.span_marginals()[0, :n]
    edge = {}
    for i in range(n):
        for length in range(1, min(chart.m, n - i) + 1):
            j = i + length
            for l in range(L):
                u = chart.U[i, length - 1, l] + chart.beta[j, l] - chart.logZ
                if i == 0:
                    edge[(i, j, None, l)] = float(np.exp(u + chart.T[L, l]))
                else:
                    for p in range(L):
                        edge[(i, j, p, l)] = float(
                            np.exp(chart.alpha[i, p] + chart.T[p, l] + u))
    return Marginals(word, chart.labels, P, edge)


def _label_strings(model: Model, ls: LabeledSegmentation | Sequence) -> list[tuple[int, int, str]]:
    if isinstance(ls, LabeledSegmentation):
        return [(i, j, str(t)) for i, j, t in ls.spans()]
    return [(i, j, str(t)) for i, j, t in ls]


def check_analysis(model: Model, word: str, spans: Sequence[tuple[int, int, str]]) -> None:
    m = model.max_segment_length
    for i, j, lab in spans:
        if lab not in model.labels:
            raise InferenceError(f"label {lab} is not in the model's tagset")
        if m is not None and j - i > m:
            raise SegmentTooLong(
                f"segment {word[i:j]!r} of {word!r} is longer than max_segment_length={m}; "
                "raise the limit or drop the instance"
            )


def analysis_vector(model: Model, word: str, ls) -> SparseVector:
    """Feature counts of a labeled segmentation, built from feature strings."""
    spans = _label_strings(model, ls)
    check_analysis(model, word, spans)
    counts: dict[int, float] = {}
    prev = BEGIN
    for i, j, lab in spans:
        vec = featurize(word, (i, j), lab, prev, model.config, model.resources, model.vocab)
        for k in vec.indices:
            counts[int(k)] = counts.get(int(k), 0.0) + 1.0
        prev = lab
    keys = sorted(counts)
    return SparseVector(np.array(keys, dtype=np.int64), np.array([counts[k] for k in keys]))


def score(model: Model, word: str, ls) -> float:
    """Unnormalized log-score sum_n lambda . g_n of one labeled segmentation."""
    return analysis_vector(model, word, ls).dot(model.weights)


def log_probability(model: Model, word: str, ls) -> float:
    return score(model, word, ls) - log_partition(model, word)


def observed_counts(model: Model, words: Sequence[WordFeatures],
                    golds: Sequence[Sequence[tuple[int, int, str]]]) -> np.ndarray:
    """Gold feature counts accumulated through the incidence matrices."""
    idx = model.index
    L = idx.n_labels
    emit = np.zeros((idx.n_base, L))
    trans = np.zeros((L + 1, L))
    for wf, spans in zip(words, golds):
        check_analysis(model, wf.word, spans)
        prev = L
        for i, j, lab in spans:
            l = model.labels.index(lab)
            row = wf.matrix.getrow(wf.span_row(i, j))
            emit[row.indices, l] += row.data
            trans[prev, l] += 1.0
            prev = l
    return idx.scatter(emit, trans)


def gradient(model: Model, word: str, gold) -> tuple[float, np.ndarray]:
    """Negative log-likelihood of ``gold`` and its gradient (expected - observed)."""
    spans = _label_strings(model, gold)
    check_analysis(model, word, spans)
    idx = model.index
    wf = encode_word(word, idx, model.config, model.resources, model.max_segment_length)
    lat = Lattice([wf], idx, model.weights)
    obs = observed_counts(model, [wf], [spans])
    nll = float(lat.logZ[0] - obs @ model.weights)
    return max(nll, 0.0), lat.expected_counts() - obs


@dataclass(frozen=True)
class Decoded:
    analysis: LabeledSegmentation | tuple
    score: float
    label_indices: tuple[int, ...]
    ends: tuple[int, ...]


def _viterbi_chart(U: np.ndarray, T: np.ndarray, n: int, m: int):
    """Best path under exact float comparison, ties broken by fewer segments,
    then lexicographically smaller label sequence, then smaller end positions."""
    L = T.shape[1]
    delta = np.full((n + 1, L), NEG_INF)
    keys: list[list] = [[None] * L for _ in range(n + 1)]
    for j in range(1, n + 1):
        lens = np.arange(1, min(m, j) + 1)
        i = j - lens
        # cand[len, prev, l]; prev index L is BEGIN, only valid from i == 0
        cand = np.full((len(lens), L + 1, L), NEG_INF)
        inner = i > 0
        if inner.any():
            cand[inner, :L, :] = (delta[i[inner], :, None] + T[None, :L, :]
                                  + U[i[inner], lens[inner] - 1, None, :])
        if (~inner).any():
            k = np.flatnonzero(~inner)[0]
            cand[k, L, :] = T[L] + U[0, j - 1, :]
        flat = cand.reshape(-1, L)
        best = flat.max(axis=0)
        delta[j] = best
        for l in range(L):
            hits = np.flatnonzero(flat[:, l] == best[l])
            options = []
            for h in hits:
                li, p = divmod(int(h), L + 1)
                start = int(i[li])
                if p == L:
                    options.append((1, (l,), (j,)))
                else:
                    nseg, labs, ends = keys[start][p]
                    options.append((nseg + 1, labs + (l,), ends + (j,)))
            keys[j][l] = min(options)
    final = delta[n]
    top = final.max()
    options = [(keys[n][l], l) for l in range(L) if final[l] == top]
    key, _ = min(options)
    return float(top), key


def viterbi(model: Model, word: str) -> Decoded:
    chart = _chart(model, word)
    n = chart.n
    best, (nseg, labs, ends) = _viterbi_chart(chart.U, chart.T, n, chart.m)
    pieces, start = [], 0
    for l, e in zip(labs, ends):
        pieces.append((word[start:e], model.labels[l]))
        start = e
    try:
        analysis = LabeledSegmentation.from_pairs(
            (s, parse_tag(t)) for s, t in pieces)
    except ValueError:
        analysis = tuple(pieces)
    return Decoded(analysis, best, labs, ends)


def decode_all(model: Model, words: Iterable[str]) -> list[Decoded]:
    return [viterbi(model, w) for w in words]
