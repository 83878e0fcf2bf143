"""Hierarchical morphotactic tags, level projection and derived views.

A tag is a path of uppercase components, e.g. ``SUFFIX:INFL:NOUN:NUMBER:PLURAL``.
Levels 0-5 are obtained by truncating the path; level 0 collapses every tag
to ``SEGMENT``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

POSITIONS = ("PREFIX", "ROOT", "SUFFIX", "UNKNOWN", "SEGMENT")
AFFIXES = ("PREFIX", "SUFFIX")
AFFIX_KINDS = ("DERIV", "INFL")
NONE = "NONE"
MAX_LEVEL = 5
MAX_COMPONENTS = 5

_COMPONENT = re.compile(r"^[A-Z][A-Z0-9_]*$")


class TagError(ValueError):
    """Malformed tag string or invalid component path."""


class GranularityError(ValueError):
    """The labels are too coarse for the requested view."""


@dataclass(frozen=True, order=True)
class MorphTag:
    components: tuple[str, ...]

    def __post_init__(self):
        _validate(self.components)

    @property
    def position(self) -> str:
        return self.components[0]

    @property
    def kind(self) -> str | None:
        """DERIV/INFL for affixes at level >= 2, otherwise None."""
        if self.position in AFFIXES and len(self.components) > 1:
            return self.components[1]
        return None

    def __str__(self) -> str:
        return ":".join(self.components)

    def __repr__(self) -> str:
        return f"MorphTag({str(self)!r})"


def _validate(components: Sequence[str]) -> None:
    if not components:
        raise TagError("empty tag")
    if len(components) > MAX_COMPONENTS:
        raise TagError(
            f"too many components ({len(components)} > {MAX_COMPONENTS}): "
            f"{components[MAX_COMPONENTS]!r}"
        )
    for comp in components:
        if not comp:
            raise TagError("empty component")
        if not _COMPONENT.match(comp):
            raise TagError(f"component {comp!r} is not an uppercase token")
    head = components[0]
    if head not in POSITIONS:
        raise TagError(f"unknown position class {head!r}")
    rest = components[1:]
    if head in ("SEGMENT", "UNKNOWN") and rest:
        raise TagError(f"{head} takes no further components, got {rest[0]!r}")
    if head == "ROOT":
        if len(rest) > 1:
            raise TagError(f"ROOT takes at most a POS component, got {rest[1]!r}")
        if rest and rest[0] in AFFIX_KINDS:
            raise TagError(f"{rest[0]} is not allowed under ROOT")
    if head in AFFIXES and rest and rest[0] not in AFFIX_KINDS:
        raise TagError(f"{head} must be followed by DERIV or INFL, got {rest[0]!r}")


SEGMENT = MorphTag(("SEGMENT",))
ROOT = MorphTag(("ROOT",))


def parse_tag(text: str) -> MorphTag:
    if not text:
        raise TagError("empty tag")
    return MorphTag(tuple(text.split(":")))


def project(tag: MorphTag, level: int) -> MorphTag:
    """Truncate ``tag`` to the given granularity level."""
    if not 0 <= level <= MAX_LEVEL:
        raise ValueError(f"level must be in [0, {MAX_LEVEL}], got {level}")
    if level == 0:
        return SEGMENT
    comps = tag.components
    if tag.position == "ROOT":
        keep = 1 if level <= 2 else 2
    elif tag.position in AFFIXES:
        keep = level
    else:
        keep = 1
    if keep >= len(comps):
        return tag
    return MorphTag(comps[:keep])


@dataclass(frozen=True)
class Tagset:
    level: int
    tags: tuple[MorphTag, ...]

    def __post_init__(self):
        if not 0 <= self.level <= MAX_LEVEL:
            raise ValueError(f"level must be in [0, {MAX_LEVEL}], got {self.level}")
        for t in self.tags:
            if project(t, self.level) != t:
                raise TagError(f"{t} is not a level-{self.level} tag")

    def __len__(self) -> int:
        return len(self.tags)

    def __iter__(self):
        return iter(self.tags)

    def __contains__(self, tag) -> bool:
        return tag in self.tags

    def index(self, tag: MorphTag) -> int:
        return self.tags.index(tag)

    def labels(self) -> list[str]:
        return [str(t) for t in self.tags]


@dataclass(frozen=True)
class LabeledSegmentation:
    word: str
    segments: tuple[tuple[str, MorphTag], ...]

    def __post_init__(self):
        for morph, _ in self.segments:
            if len(morph) < 1:
                raise ValueError(f"empty segment in analysis of {self.word!r}")
        joined = "".join(m for m, _ in self.segments)
        if joined != self.word:
            raise ValueError(
                f"segments concatenate to {joined!r}, expected {self.word!r}"
            )

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, MorphTag | str]]) -> "LabeledSegmentation":
        segs = tuple(
            (m, t if isinstance(t, MorphTag) else parse_tag(t)) for m, t in pairs
        )
        return cls("".join(m for m, _ in segs), segs)

    @property
    def morphs(self) -> list[str]:
        return [m for m, _ in self.segments]

    @property
    def tags(self) -> list[MorphTag]:
        return [t for _, t in self.segments]

    def spans(self) -> list[tuple[int, int, MorphTag]]:
        out, start = [], 0
        for morph, tag in self.segments:
            out.append((start, start + len(morph), tag))
            start += len(morph)
        return out

    def boundaries(self) -> frozenset[int]:
        """Internal split positions, strictly inside the word."""
        return frozenset(end for _, end, _ in self.spans()[:-1])

    def project(self, level: int) -> "LabeledSegmentation":
        return LabeledSegmentation(
            self.word, tuple((m, project(t, level)) for m, t in self.segments)
        )

    def serialize(self) -> str:
        return " ".join(f"{m}:{t}" for m, t in self.segments)

    def __str__(self) -> str:
        return self.serialize()


def build_tagset(data: Iterable[LabeledSegmentation], level: int) -> Tagset:
    tags = {project(t, level) for ls in data for t in ls.tags}
    if level == 0:
        tags = {SEGMENT}
    return Tagset(level, tuple(sorted(tags, key=str)))


def inflectional_view(ls: LabeledSegmentation, level: int = 4) -> LabeledSegmentation:
    """Keep inflectional tags (projected to ``level``); every other segment becomes SEGMENT."""
    return LabeledSegmentation(ls.word, tuple(
        (m, project(t, level) if t.kind == "INFL" else SEGMENT) for m, t in ls.segments))


@dataclass(frozen=True)
class Views:
    ums: list[str]
    roots: list[str] | None = None
    stem: str | None = None
    morph_tag: list[str] | None = None
    # 4 when the bundle holds feature names, 5 when it holds values
    feature_level: int | None = None

    def require(self, name: str):
        value = getattr(self, name)
        if value is None:
            raise GranularityError(
                f"the {name} view needs finer labels than this analysis carries"
            )
        return value


def _is_root(tag: MorphTag) -> bool:
    return tag.position == "ROOT"


def label_granularity(ls: LabeledSegmentation) -> int:
    """Smallest level at which the analysis is distinguishable (lower bound)."""
    level = 5
    for tag in ls.tags:
        if tag.position == "SEGMENT":
            return 0
        if tag.position in AFFIXES and len(tag.components) < 2:
            level = min(level, 1)
    return level


def derive_views(ls: LabeledSegmentation) -> Views:
    ums = ls.morphs
    granularity = label_granularity(ls)
    if granularity == 0:
        return Views(ums=ums)
    roots = [m for m, t in ls.segments if _is_root(t)]
    if granularity < 2:
        return Views(ums=ums, roots=roots)
    stem = "".join(
        m for m, t in ls.segments if _is_root(t) or t.kind == "DERIV"
    )
    bundle, feature_level = [], None
    for _, t in ls.segments:
        if t.kind == "INFL" and len(t.components) >= 4:
            bundle.append(t.components[-1])
            feature_level = max(feature_level or 0, len(t.components))
    return Views(ums=ums, roots=roots, stem=stem, morph_tag=bundle,
                 feature_level=feature_level)
