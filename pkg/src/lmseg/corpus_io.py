"""Corpus, gazetteer and dictionary readers; deterministic splits and folds.

Corpus lines look like::

    word<TAB>morph:TAG morph:TAG, morph:TAG ...

with alternative gold analyses separated by commas.
"""
from __future__ import annotations

import io
import os
import random
import unicodedata
from dataclasses import dataclass
from typing import Iterable, TextIO

from .morphotags import LabeledSegmentation, TagError, parse_tag

ROLES = ("TRAIN", "TUNE", "DEV", "TEST", "UNLABELED")


class CorpusError(ValueError):
    """Bad input data; carries the offending line number when known."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


def normalize(text: str) -> str:
    return unicodedata.normalize("NFC", text)


@dataclass(frozen=True)
class Dataset:
    entries: tuple[tuple[str, tuple[LabeledSegmentation, ...]], ...]
    role: str = "TRAIN"

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        seen = set()
        for word, golds in self.entries:
            if word in seen:
                raise CorpusError(f"duplicate word {word!r}")
            seen.add(word)
            if self.role != "UNLABELED" and not golds:
                raise CorpusError(f"no gold analysis for {word!r}")
            for g in golds:
                if g.word != word:
                    raise CorpusError(f"analysis {g} does not spell {word!r}")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def words(self) -> list[str]:
        return [w for w, _ in self.entries]

    def golds(self, word: str) -> tuple[LabeledSegmentation, ...]:
        return self._index[word]

    @property
    def _index(self) -> dict:
        # cached lazily; frozen dataclass so go through object.__setattr__
        idx = self.__dict__.get("_idx")
        if idx is None:
            idx = dict(self.entries)
            object.__setattr__(self, "_idx", idx)
        return idx

    def with_role(self, role: str) -> "Dataset":
        return Dataset(self.entries, role)

    def first_golds(self) -> list[LabeledSegmentation]:
        return [golds[0] for _, golds in self.entries]

    def all_golds(self) -> list[LabeledSegmentation]:
        return [g for _, golds in self.entries for g in golds]

    def project(self, level: int) -> "Dataset":
        return Dataset(
            tuple((w, tuple(g.project(level) for g in golds)) for w, golds in self.entries),
            self.role,
        )

    def map(self, fn) -> "Dataset":
        """Apply ``fn`` to every gold analysis."""
        return Dataset(
            tuple((w, tuple(fn(g) for g in golds)) for w, golds in self.entries), self.role)

    def subset(self, words: Iterable[str], role: str | None = None) -> "Dataset":
        idx = self._index
        return Dataset(tuple((w, idx[w]) for w in words), role or self.role)

    @classmethod
    def concat(cls, parts: Iterable["Dataset"], role: str = "TRAIN") -> "Dataset":
        entries = []
        for p in parts:
            entries.extend(p.entries)
        return cls(tuple(entries), role)


def _open_text(source) -> TextIO:
    if isinstance(source, (str, os.PathLike)):
        return open(source, encoding="utf-8", newline="")
    return source


def _lines(source):
    stream = _open_text(source)
    try:
        for lineno, raw in enumerate(stream, start=1):
            yield lineno, normalize(raw.rstrip("\r\n"))
    finally:
        if stream is not source:
            stream.close()


def parse_analysis(text: str, lineno: int | None = None) -> LabeledSegmentation:
    pairs = []
    for token in text.split():
        morph, sep, tag = token.partition(":")
        if not sep or not morph:
            raise CorpusError(f"token {token!r} is not morph:TAG", lineno)
        try:
            pairs.append((morph, parse_tag(tag)))
        except TagError as exc:
            raise CorpusError(f"bad tag in {token!r}: {exc}", lineno) from exc
    if not pairs:
        raise CorpusError("empty analysis", lineno)
    return LabeledSegmentation.from_pairs(pairs)


def load_corpus(source, role: str = "TRAIN") -> Dataset:
    entries, seen = [], set()
    for lineno, line in _lines(source):
        if not line.strip() or line.startswith("#"):
            continue
        word, sep, rest = line.partition("\t")
        if not sep:
            if role == "UNLABELED":
                rest = ""
            else:
                raise CorpusError("missing TAB between word and analyses", lineno)
        word = word.strip()
        if word in seen:
            raise CorpusError(f"duplicate word {word!r}", lineno)
        seen.add(word)
        golds = []
        for chunk in rest.split(","):
            if not chunk.strip():
                continue
            ls = parse_analysis(chunk, lineno)
            if ls.word != word:
                raise CorpusError(
                    f"segments concatenate to {ls.word!r}, not {word!r}", lineno
                )
            golds.append(ls)
        if not golds and role != "UNLABELED":
            raise CorpusError(f"no analysis for {word!r}", lineno)
        entries.append((word, tuple(golds)))
    return Dataset(tuple(entries), role)


def load_corpus_text(text: str, role: str = "TRAIN") -> Dataset:
    return load_corpus(io.StringIO(text), role)


def dump_corpus(data: Dataset, stream: TextIO) -> None:
    for word, golds in data:
        stream.write(word + "\t" + ", ".join(g.serialize() for g in golds) + "\n")


def serialize_corpus(data: Dataset) -> str:
    buf = io.StringIO()
    dump_corpus(data, buf)
    return buf.getvalue()


def save_corpus(data: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        dump_corpus(data, fh)


def load_wordlist(source) -> list[str]:
    """One word per line (first TAB field); comments and blanks skipped."""
    words = []
    for _, line in _lines(source):
        if not line.strip() or line.startswith("#"):
            continue
        words.append(line.split("\t", 1)[0].strip())
    return words


@dataclass(frozen=True)
class AffixGazetteer:
    prefixes: frozenset[str] = frozenset()
    suffixes: frozenset[str] = frozenset()

    def __len__(self) -> int:
        return len(self.prefixes) + len(self.suffixes)


def load_gazetteer(source) -> AffixGazetteer:
    prefixes, suffixes = set(), set()
    for lineno, line in _lines(source):
        entry = line.strip()
        if not entry or entry.startswith("#"):
            continue
        lead, trail = entry.startswith("-"), entry.endswith("-")
        if lead == trail:
            raise CorpusError(
                f"affix {entry!r} needs exactly one '-' marker (-suffix or prefix-)",
                lineno,
            )
        body = entry[1:] if lead else entry[:-1]
        if not body:
            raise CorpusError("empty affix", lineno)
        (suffixes if lead else prefixes).add(body)
    return AffixGazetteer(frozenset(prefixes), frozenset(suffixes))


@dataclass(frozen=True)
class DictionarySet:
    words: frozenset[str] = frozenset()

    @property
    def size(self) -> int:
        return len(self.words)

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, item: str) -> bool:
        return item in self.words


def load_dictionary(source) -> DictionarySet:
    words = set()
    for _, line in _lines(source):
        w = line.strip()
        if w:
            words.add(w)
    return DictionarySet(frozenset(words))


def split_sizes(n: int, proportions) -> list[int]:
    """Largest-remainder apportionment of ``n`` items to integer proportions."""
    total = sum(proportions)
    raw = [n * p / total for p in proportions]
    sizes = [int(r) for r in raw]
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - sizes[i]), i))
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1
    return sizes


def split_dataset(data: Dataset, proportions, seed: int,
                  roles=("TRAIN", "TUNE", "DEV", "TEST")) -> list[Dataset]:
    words = list(data.words)
    random.Random(seed).shuffle(words)
    out, start = [], 0
    for size, role in zip(split_sizes(len(words), proportions), roles):
        out.append(data.subset(words[start:start + size], role))
        start += size
    return out


def split_folds(data: Dataset, k: int, seed: int) -> list[tuple[Dataset, Dataset, Dataset]]:
    """Rotating k-fold split: fold f tunes on chunk f, develops on chunk f+1
    and trains on the remaining k-2 chunks.

    With 1000 words and k=10 every fold is 800/100/100, and every word lands
    in exactly one Tune slice and one Dev slice across the folds.
    """
    if k < 2:
        raise ValueError("need at least 2 folds")
    if k > len(data):
        raise ValueError(f"cannot make {k} folds from {len(data)} words")
    words = list(data.words)
    random.Random(seed).shuffle(words)
    chunks, start = [], 0
    for size in split_sizes(len(words), [1] * k):
        chunks.append(words[start:start + size])
        start += size
    folds = []
    for f in range(k):
        nxt = (f + 1) % k
        train = [w for g, chunk in enumerate(chunks) if g not in (f, nxt) for w in chunk]
        folds.append((
            data.subset(train, "TRAIN"),
            data.subset(chunks[f], "TUNE"),
            data.subset(chunks[nxt], "DEV"),
        ))
    return folds
