"""Synthetic agglutinative corpora with known morphotactics.

A word is ``[prefix] root [derivational suffix]{0,2} [inflection]*``.  Each
inflectional feature (the fourth tag component, e.g. NUMBER or CASE)
contributes at most one value, and features appear in an order consistent
with the grammar's ``order`` constraints.  Grammars are TSV files::

    root    ROOT:NOUN                        tak    1
    suffix  SUFFIX:INFL:NOUN:NUMBER:PLURAL   ler    0.25
    suffix  SUFFIX:INFL:NOUN:NUMBER:PLURAL   lar    0.25
    order   NUMBER                           CASE

For roots the weight is a sampling weight.  For affixes the summed weight of
a tag's rows is the probability the tag is used, and the surface is drawn
proportionally to the row weights.
"""
from __future__ import annotations

import random
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from .corpus_io import AffixGazetteer, CorpusError, Dataset, DictionarySet, _lines
from .morphotags import LabeledSegmentation, MorphTag, TagError, Views, derive_views, parse_tag


class GrammarError(ValueError):
    pass


@dataclass(frozen=True)
class Affix:
    tag: MorphTag
    surfaces: tuple[str, ...]
    weights: tuple[float, ...]

    @property
    def probability(self) -> float:
        return min(1.0, sum(self.weights))

    @property
    def pos(self) -> str | None:
        c = self.tag.components
        return c[2] if len(c) > 2 and c[2] != "NONE" else None

    @property
    def feature(self) -> str | None:
        c = self.tag.components
        return c[3] if len(c) > 3 else None


@dataclass
class SynthGrammar:
    roots: dict[str, list[tuple[str, float]]]
    prefixes: list[Affix] = field(default_factory=list)
    derivations: list[Affix] = field(default_factory=list)
    inflections: list[Affix] = field(default_factory=list)
    order: list[tuple[str, str]] = field(default_factory=list)
    seed: int = 0
    max_derivations: int = 2

    def __post_init__(self):
        if not any(self.roots.values()):
            raise GrammarError("grammar has no roots")
        self._rank = self._feature_rank()

    def _feature_rank(self) -> dict[str, int]:
        """Topological order of inflectional features; grammar order breaks ties."""
        feats = []
        for a in self.inflections:
            if a.feature and a.feature not in feats:
                feats.append(a.feature)
        before = defaultdict(set)
        for a, b in self.order:
            before[b].add(a)
        rank, placed = {}, set()
        while len(placed) < len(feats):
            ready = [f for f in feats if f not in placed and before[f] & set(feats) <= placed]
            if not ready:
                raise GrammarError("order constraints are cyclic")
            placed.add(ready[0])
            rank[ready[0]] = len(rank)
        return rank

    def feature_rank(self, feature: str) -> int:
        return self._rank[feature]

    def root_inventory(self) -> list[tuple[str, str, float]]:
        return [(s, pos, w) for pos, items in sorted(self.roots.items()) for s, w in items]

    def affix_surfaces(self) -> tuple[set[str], set[str]]:
        pre = {s for a in self.prefixes for s in a.surfaces}
        suf = {s for a in self.derivations + self.inflections for s in a.surfaces}
        return pre, suf

    def gazetteer(self) -> AffixGazetteer:
        pre, suf = self.affix_surfaces()
        return AffixGazetteer(frozenset(pre), frozenset(suf))

    def dictionary(self) -> DictionarySet:
        return DictionarySet(frozenset(s for s, _, _ in self.root_inventory()))


def _group_affixes(rows) -> list[Affix]:
    by_tag: dict[MorphTag, list] = {}
    for tag, surface, weight in rows:
        by_tag.setdefault(tag, []).append((surface, weight))
    return [Affix(tag, tuple(s for s, _ in items), tuple(w for _, w in items))
            for tag, items in by_tag.items()]


def make_grammar(roots: Iterable[tuple[str, str, float]],
                 affixes: Iterable[tuple[str, str, float]],
                 order: Iterable[tuple[str, str]] = (), seed: int = 0) -> SynthGrammar:
    """Build a grammar from (tag, surface, weight) rows."""
    root_map: dict[str, list] = defaultdict(list)
    for tag, surface, weight in roots:
        t = parse_tag(tag)
        if t.position != "ROOT":
            raise GrammarError(f"{tag} is not a root tag")
        pos = t.components[1] if len(t.components) > 1 else "NONE"
        root_map[pos].append((surface, float(weight)))
    pre, der, inf = [], [], []
    for tag, surface, weight in affixes:
        t = parse_tag(tag)
        if t.position == "PREFIX":
            pre.append((t, surface, float(weight)))
        elif t.position == "SUFFIX" and t.kind == "DERIV":
            der.append((t, surface, float(weight)))
        elif t.position == "SUFFIX" and t.kind == "INFL":
            if len(t.components) < 4:
                raise GrammarError(f"inflectional tag {tag} lacks a feature component")
            inf.append((t, surface, float(weight)))
        else:
            raise GrammarError(f"unsupported affix tag {tag}")
    order_pairs = [(_feature_name(a), _feature_name(b)) for a, b in order]
    return SynthGrammar(dict(root_map), _group_affixes(pre), _group_affixes(der),
                        _group_affixes(inf), order_pairs, seed)


def _feature_name(text: str) -> str:
    # accept either a bare feature ("NUMBER") or a tag path ending in one
    if ":" in text:
        comps = parse_tag(text).components
        if len(comps) < 4:
            raise GrammarError(f"order constraint {text} does not name a feature")
        return comps[3]
    return text


def load_grammar(source, seed: int = 0) -> SynthGrammar:
    roots, affixes, order = [], [], []
    for lineno, line in _lines(source):
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.split("\t")
        kind = cols[0].strip().lower()
        try:
            if kind == "order":
                order.append((cols[1].strip(), cols[2].strip()))
            elif kind in ("root", "prefix", "suffix"):
                weight = float(cols[3]) if len(cols) > 3 and cols[3].strip() else 1.0
                row = (cols[1].strip(), cols[2].strip(), weight)
                (roots if kind == "root" else affixes).append(row)
            else:
                raise CorpusError(f"unknown row kind {kind!r}", lineno)
        except (IndexError, ValueError, TagError) as exc:
            if isinstance(exc, CorpusError):
                raise
            raise CorpusError(f"malformed grammar row: {exc}", lineno) from exc
    return make_grammar(roots, affixes, order, seed)


def dump_grammar(g: SynthGrammar) -> str:
    lines = []
    for pos, items in sorted(g.roots.items()):
        tag = "ROOT" if pos == "NONE" else f"ROOT:{pos}"
        lines.extend(f"root\t{tag}\t{s}\t{w:g}" for s, w in items)
    for a in g.prefixes + g.derivations + g.inflections:
        kind = "prefix" if a.tag.position == "PREFIX" else "suffix"
        lines.extend(f"{kind}\t{a.tag}\t{s}\t{w:g}" for s, w in zip(a.surfaces, a.weights))
    lines.extend(f"order\t{a}\t{b}" for a, b in g.order)
    return "\n".join(lines) + "\n"


def _pick(rng: random.Random, items, weights):
    return rng.choices(items, weights=weights, k=1)[0]


def _sample(g: SynthGrammar, rng: random.Random) -> LabeledSegmentation:
    inventory = g.root_inventory()
    surface, pos, _ = _pick(rng, inventory, [w for _, _, w in inventory])
    pieces = []
    for a in g.prefixes:
        if rng.random() < a.probability:
            pieces.append((_pick(rng, a.surfaces, a.weights), a.tag))
            break
    root_tag = MorphTag(("ROOT",) if pos == "NONE" else ("ROOT", pos))
    pieces.append((surface, root_tag))
    used = set()
    for _ in range(g.max_derivations):
        options = [a for a in g.derivations if a.tag not in used]
        rng.shuffle(options)
        chosen = next((a for a in options if rng.random() < a.probability), None)
        if chosen is None:
            break
        used.add(chosen.tag)
        pieces.append((_pick(rng, chosen.surfaces, chosen.weights), chosen.tag))
        pos = chosen.pos or pos
    by_feature: dict[str, list[Affix]] = defaultdict(list)
    for a in g.inflections:
        if a.pos in (None, pos):
            by_feature[a.feature].append(a)
    for feat in sorted(by_feature, key=g.feature_rank):
        values = by_feature[feat]
        total = sum(a.probability for a in values)
        if rng.random() < min(1.0, total):
            a = _pick(rng, values, [v.probability for v in values])
            pieces.append((_pick(rng, a.surfaces, a.weights), a.tag))
    return LabeledSegmentation.from_pairs(pieces)


def parse(g: SynthGrammar, word: str) -> list[LabeledSegmentation]:
    """Every analysis of ``word`` the grammar can generate."""
    results = []
    roots = g.root_inventory()

    def inflect(pos_i, pos, last_rank, acc):
        if pos_i == len(word):
            results.append(LabeledSegmentation.from_pairs(acc))
        for a in g.inflections:
            if a.pos not in (None, pos) or g.feature_rank(a.feature) <= last_rank:
                continue
            for s in a.surfaces:
                if word.startswith(s, pos_i):
                    inflect(pos_i + len(s), pos, g.feature_rank(a.feature), acc + [(s, a.tag)])

    def derive(pos_i, pos, used, acc):
        inflect(pos_i, pos, -1, acc)
        if len(used) >= g.max_derivations:
            return
        for a in g.derivations:
            if a.tag in used:
                continue
            for s in a.surfaces:
                if word.startswith(s, pos_i):
                    derive(pos_i + len(s), a.pos or pos, used | {a.tag}, acc + [(s, a.tag)])

    def root(pos_i, acc):
        for s, pos, _ in roots:
            if word.startswith(s, pos_i):
                tag = MorphTag(("ROOT",) if pos == "NONE" else ("ROOT", pos))
                derive(pos_i + len(s), pos, frozenset(), acc + [(s, tag)])

    root(0, [])
    for a in g.prefixes:
        for s in a.surfaces:
            if word.startswith(s):
                root(len(s), [(s, a.tag)])
    unique = {ls.serialize(): ls for ls in results}
    return [unique[k] for k in sorted(unique)]


def generate(g: SynthGrammar, n_types: int, seed: int | None = None) -> Dataset:
    """``n_types`` distinct words, each with a single unambiguous gold analysis."""
    if n_types < 1:
        raise ValueError("n_types must be positive")
    rng = random.Random(g.seed if seed is None else seed)
    entries, seen = [], set()
    attempts, budget = 0, 200 * n_types + 1000
    while len(entries) < n_types:
        attempts += 1
        if attempts > budget:
            raise GrammarError(
                f"inventory too small: produced {len(entries)} of {n_types} distinct types"
            )
        ls = _sample(g, rng)
        if ls.word in seen:
            continue
        seen.add(ls.word)
        if len(parse(g, ls.word)) != 1:
            continue
        entries.append((ls.word, (ls,)))
    return Dataset(tuple(entries), "TRAIN")


@dataclass(frozen=True)
class OracleViews:
    analysis: LabeledSegmentation
    views: Views


def oracle_views(g: SynthGrammar, word: str) -> OracleViews:
    analyses = parse(g, word)
    if not analyses:
        raise GrammarError(f"{word!r} is not generated by this grammar")
    if len(analyses) > 1:
        raise GrammarError(f"{word!r} is ambiguous under this grammar")
    return OracleViews(analyses[0], derive_views(analyses[0]))


_ONSETS = "bcdfghklmnprstvyz"
_VOWELS = "aeiou"


def _random_roots(rng: random.Random, n: int, taken: set[str]) -> list[str]:
    out = []
    while len(out) < n:
        syll = rng.choice((1, 2, 2, 3))
        s = "".join(rng.choice(_ONSETS) + rng.choice(_VOWELS) for _ in range(syll))
        if rng.random() < 0.5:
            s += rng.choice(_ONSETS)
        if len(s) >= 3 and s not in taken:
            taken.add(s)
            out.append(s)
    return out


# 12 suffix tags, two allomorphs each; used by the acceptance experiments.
DEFAULT_SUFFIXES = (
    ("SUFFIX:DERIV:NOUN", ("lik", "luk"), 0.12),
    ("SUFFIX:DERIV:VERB", ("les", "las"), 0.12),
    ("SUFFIX:DERIV:ADJ", ("siz", "suz"), 0.08),
    ("SUFFIX:INFL:NOUN:NUMBER:PLURAL", ("ler", "lar"), 0.5),
    ("SUFFIX:INFL:NOUN:POSSESSIVE:P1SG", ("im", "um"), 0.3),
    ("SUFFIX:INFL:NOUN:CASE:GENITIVE", ("in", "un"), 0.2),
    ("SUFFIX:INFL:NOUN:CASE:DATIVE", ("e", "a"), 0.2),
    ("SUFFIX:INFL:NOUN:CASE:LOCATIVE", ("de", "da"), 0.2),
    ("SUFFIX:INFL:VERB:POLARITY:NEGATIVE", ("me", "ma"), 0.3),
    ("SUFFIX:INFL:VERB:TENSE:PAST", ("di", "du"), 0.35),
    ("SUFFIX:INFL:VERB:TENSE:FUTURE", ("ecek", "acak"), 0.35),
    ("SUFFIX:INFL:VERB:PERSON:P1PL", ("iz", "uz"), 0.5),
)
DEFAULT_ORDER = (("NUMBER", "POSSESSIVE"), ("POSSESSIVE", "CASE"), ("NUMBER", "CASE"),
                 ("POLARITY", "TENSE"), ("TENSE", "PERSON"))


def _confusable_roots(rng: random.Random, plain: list[tuple[str, str]], n: int,
                      taken: set[str]) -> list[tuple[str, str]]:
    """Roots that read like another root plus a suffix of the other part of speech."""
    by_pos = defaultdict(list)
    for tag, surfaces, _ in DEFAULT_SUFFIXES:
        parts = tag.split(":")
        if parts[1] == "INFL":
            by_pos[parts[2]].extend(surfaces)
    out = []
    while len(out) < n:
        base, pos = rng.choice(plain)
        others = [p for p in by_pos if p != pos]
        if not others:
            break
        other = rng.choice(others)
        s = base + rng.choice(by_pos[other])
        if s not in taken:
            taken.add(s)
            out.append((s, other))
    return out


def default_grammar(seed: int = 0, n_roots: int = 50, pos=("NOUN", "VERB"),
                    confusable: float = 0.4, zipf: float = 0.0) -> SynthGrammar:
    """50 roots over two parts of speech and 12 two-allomorph suffix tags.

    A ``confusable`` share of the roots is built as another root followed by
    an inflection of the other part of speech, so that only the tag sequence
    rules out the false split. With ``zipf > 0`` root frequencies follow a
    power law over a shuffled ranking, leaving some roots rare or unseen.
    """
    rng = random.Random(seed)
    taken = {s for _, surfaces, _ in DEFAULT_SUFFIXES for s in surfaces}
    n_tricky = int(round(confusable * n_roots))
    names = _random_roots(rng, n_roots - n_tricky, taken)
    plain = [(s, pos[k % len(pos)]) for k, s in enumerate(names)]
    plain += _confusable_roots(rng, plain, n_tricky, taken)
    ranks = list(range(len(plain)))
    rng.shuffle(ranks)
    roots = [(f"ROOT:{p}", s, (r + 1.0) ** -zipf) for (s, p), r in zip(plain, ranks)]
    affixes = [(tag, s, p / len(surfaces))
               for tag, surfaces, p in DEFAULT_SUFFIXES for s in surfaces]
    return make_grammar(roots, affixes, DEFAULT_ORDER, seed)
