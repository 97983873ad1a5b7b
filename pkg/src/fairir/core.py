"""Domain types shared by every part of the toolkit.

A :class:`Topic` bundles a query's aspect set, its candidate documents, the
relevance table and the provider's default ranking. Group membership of a
ranking prefix is tracked incrementally by :class:`PrefixState`; documents
that belong to several groups spread one unit of mass evenly across them, and
ungrouped documents fall into :data:`OTHER_GROUP`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Union

OTHER_GROUP = "__other__"

SUM_TOLERANCE = 1e-9
FILE_SUM_TOLERANCE = 1e-6


class DistributionError(ValueError):
    """A group distribution is malformed or cannot be constructed."""


@dataclass(frozen=True)
class Document:
    doc_id: str
    groups: frozenset = frozenset()
    default_rank: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "groups", frozenset(self.groups))
        if self.default_rank is not None and self.default_rank < 1:
            raise ValueError(f"default_rank of {self.doc_id!r} must be >= 1")

    @property
    def effective_groups(self) -> frozenset:
        """Groups used for mass accounting; ungrouped documents map to ``OTHER_GROUP``."""
        return self.groups if self.groups else frozenset((OTHER_GROUP,))

    def group_shares(self) -> dict:
        """Fractional credit: each of the document's m groups receives 1/m."""
        groups = self.effective_groups
        share = 1.0 / len(groups)
        return {g: share for g in groups}


@dataclass(frozen=True)
class Judgments:
    """Relevance grades keyed by ``(doc_id, aspect_id)``; absent entries read as 0."""

    table: Mapping = field(default_factory=dict)
    binary: bool = False

    def __post_init__(self):
        table = {}
        for (doc_id, aspect), grade in dict(self.table).items():
            grade = float(grade)
            if grade < 0 or math.isnan(grade):
                raise ValueError(f"grade for ({doc_id!r}, {aspect!r}) must be >= 0, got {grade}")
            if self.binary and grade not in (0.0, 1.0):
                raise ValueError(f"binary judgments only allow 0 or 1, got {grade} for ({doc_id!r}, {aspect!r})")
            table[(doc_id, aspect)] = grade
        object.__setattr__(self, "table", table)
        by_doc: dict = {}
        for (doc_id, aspect), grade in table.items():
            if grade > 0:
                by_doc.setdefault(doc_id, {})[aspect] = grade
        object.__setattr__(self, "_by_doc", by_doc)

    def grade(self, doc_id: str, aspect) -> float:
        return self.table.get((doc_id, aspect), 0.0)

    def aspects_of(self, doc_id: str) -> Mapping:
        """Non-zero grades of ``doc_id`` keyed by aspect."""
        return self._by_doc.get(doc_id, {})

    def topic_relevance(self, doc_id: str) -> float:
        """A document is as relevant to the topic as its best aspect grade."""
        grades = self._by_doc.get(doc_id)
        return max(grades.values()) if grades else 0.0

    def aspects(self) -> set:
        return {aspect for _, aspect in self.table}


@dataclass(frozen=True)
class Topic:
    topic_id: str
    aspects: frozenset
    candidates: tuple
    judgments: Judgments = field(default_factory=Judgments)
    default_ranking: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "aspects", frozenset(self.aspects))
        object.__setattr__(self, "candidates", tuple(self.candidates))
        object.__setattr__(self, "default_ranking", tuple(self.default_ranking))
        if not self.aspects:
            raise ValueError(f"topic {self.topic_id!r} needs at least one aspect")
        docs = {}
        for doc in self.candidates:
            if doc.doc_id in docs:
                raise ValueError(f"duplicate doc_id {doc.doc_id!r} in topic {self.topic_id!r}")
            docs[doc.doc_id] = doc
        ranks = [d.default_rank for d in self.candidates if d.default_rank is not None]
        if len(ranks) != len(set(ranks)):
            raise ValueError(f"default ranks are not unique in topic {self.topic_id!r}")
        unknown = self.judgments.aspects() - self.aspects
        if unknown:
            raise ValueError(f"judgments reference aspects outside topic {self.topic_id!r}: {sorted(unknown)}")
        if len(set(self.default_ranking)) != len(self.default_ranking):
            raise ValueError(f"default ranking of topic {self.topic_id!r} has duplicates")
        missing = [d for d in self.default_ranking if d not in docs]
        if missing:
            raise ValueError(f"default ranking of topic {self.topic_id!r} names unknown docs: {missing[:5]}")
        object.__setattr__(self, "_docs", docs)

    def doc(self, doc_id: str) -> Document:
        return self._docs[doc_id]

    def __contains__(self, doc_id) -> bool:
        return doc_id in self._docs

    @property
    def doc_ids(self) -> list:
        return [d.doc_id for d in self.candidates]

    def group_universe(self) -> frozenset:
        """Union of effective groups over all candidates, not just a prefix."""
        out = set()
        for doc in self.candidates:
            out |= doc.effective_groups
        return frozenset(out)

    def relevance(self, doc_id: str) -> float:
        return self.judgments.topic_relevance(doc_id)

    def tie_key(self, doc_id: str) -> tuple:
        """Deterministic secondary order: lower default rank, then doc id."""
        rank = self._docs[doc_id].default_rank
        return (math.inf if rank is None else rank, doc_id)

    def with_judgments(self, judgments: Judgments, aspects: Optional[Iterable] = None) -> "Topic":
        return Topic(
            topic_id=self.topic_id,
            aspects=frozenset(aspects) if aspects is not None else self.aspects,
            candidates=self.candidates,
            judgments=judgments,
            default_ranking=self.default_ranking,
        )


@dataclass(frozen=True)
class Ranking:
    """An ordered top-k list of doc ids.

    ``truncated`` is set when fewer than the requested k items were available;
    ``explored`` records, per rank, whether a randomized ranker took its
    exploration branch.
    """

    items: tuple
    truncated: bool = False
    explored: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        if len(set(self.items)) != len(self.items):
            raise ValueError("ranking contains duplicate doc ids")

    @property
    def k(self) -> int:
        return len(self.items)

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __getitem__(self, i):
        return self.items[i]

    def validate(self, topic: Topic) -> None:
        unknown = [d for d in self.items if d not in topic]
        if unknown:
            raise ValueError(f"ranking names docs outside topic {topic.topic_id!r}: {unknown[:5]}")


@dataclass(frozen=True)
class GroupDistribution:
    """Probability mass per group id. Zero-mass groups may be listed explicitly."""

    mass: Mapping

    def __post_init__(self):
        mass = {g: float(m) for g, m in dict(self.mass).items()}
        if any(m < 0 or math.isnan(m) for m in mass.values()):
            raise DistributionError(f"negative or NaN mass in {mass}")
        total = math.fsum(mass.values())
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise DistributionError(f"group masses sum to {total!r}, expected 1")
        object.__setattr__(self, "mass", mass)

    @classmethod
    def from_weights(cls, weights: Mapping, universe: Iterable = ()) -> "GroupDistribution":
        """Normalize non-negative weights; groups in ``universe`` default to 0."""
        merged = {g: 0.0 for g in universe}
        merged.update({g: float(w) for g, w in weights.items()})
        total = math.fsum(merged.values())
        if total <= 0:
            raise DistributionError("cannot normalize all-zero weights")
        return cls({g: w / total for g, w in merged.items()})

    def __getitem__(self, group) -> float:
        return self.mass.get(group, 0.0)

    def groups(self) -> frozenset:
        return frozenset(self.mass)

    def support(self) -> frozenset:
        return frozenset(g for g, m in self.mass.items() if m > 0)

    def as_dict(self) -> dict:
        return dict(self.mass)


@dataclass(frozen=True)
class PrefixState:
    aspect_counts: Mapping = field(default_factory=dict)
    group_counts: Mapping = field(default_factory=dict)
    depth: int = 0
    members: frozenset = frozenset()

    def append(self, doc: Document, judgments: Judgments) -> "PrefixState":
        return append_to_prefix(self, doc, judgments)


def append_to_prefix(state: PrefixState, doc: Document, judgments: Judgments) -> PrefixState:
    """Return the state after placing ``doc`` at rank ``depth + 1``."""
    if doc.doc_id in state.members:
        raise ValueError(f"{doc.doc_id!r} is already in the prefix")
    aspects = dict(state.aspect_counts)
    for aspect, grade in judgments.aspects_of(doc.doc_id).items():
        aspects[aspect] = aspects.get(aspect, 0.0) + grade
    groups = dict(state.group_counts)
    for g, share in doc.group_shares().items():
        groups[g] = groups.get(g, 0.0) + share
    return PrefixState(aspects, groups, state.depth + 1, state.members | {doc.doc_id})


def prefix_state(topic: Topic, doc_ids: Sequence) -> PrefixState:
    """Build the state of a prefix from scratch."""
    state = PrefixState()
    for doc_id in doc_ids:
        state = append_to_prefix(state, topic.doc(doc_id), topic.judgments)
    return state


def prefix_distribution(state: PrefixState, universe: Iterable = ()) -> GroupDistribution:
    """Group mass of the prefix normalized by its depth."""
    if state.depth == 0:
        raise DistributionError("empty prefix has no distribution")
    mass = {g: 0.0 for g in universe}
    for g, c in state.group_counts.items():
        mass[g] = c / state.depth
    return GroupDistribution(mass)


NOTIONS = ("uniform", "collection", "relprop")
_NOTION_ALIASES = {
    "uniform": "uniform",
    "parity": "uniform",
    "collection": "collection",
    "demographic-parity": "collection",
    "relprop": "relprop",
    "relevance-proportional": "relprop",
    "disparate-treatment": "relprop",
}

Notion = Union[str, Mapping, GroupDistribution]


def build_desired_distribution(topic: Topic, notion: Notion = "uniform") -> GroupDistribution:
    """Target group distribution for ``topic`` under a fairness notion.

    ``notion`` is one of ``"uniform"`` (equal mass over the topic's groups),
    ``"collection"`` (the groups' share of all candidates) or ``"relprop"``
    (mass proportional to each group's mean topic relevance). A mapping or
    :class:`GroupDistribution` is taken as an explicit target and validated.
    """
    universe = topic.group_universe()
    if not universe:
        raise DistributionError(f"topic {topic.topic_id!r} has no candidates to define groups")

    if isinstance(notion, (Mapping, GroupDistribution)):
        return _explicit(topic, notion, universe)

    kind = _NOTION_ALIASES.get(str(notion).lower())
    if kind is None:
        raise ValueError(f"unknown fairness notion {notion!r}; choose from {NOTIONS} or pass a mapping")

    if kind == "uniform":
        n = len(universe)
        return GroupDistribution({g: 1.0 / n for g in universe})

    if kind == "collection":
        weights = {g: 0.0 for g in universe}
        for doc in topic.candidates:
            for g, share in doc.group_shares().items():
                weights[g] += share
        return GroupDistribution.from_weights(weights)

    # relevance-proportional: fractional-credit weighted mean relevance per group
    total = {g: 0.0 for g in universe}
    size = {g: 0.0 for g in universe}
    for doc in topic.candidates:
        rel = topic.relevance(doc.doc_id)
        for g, share in doc.group_shares().items():
            total[g] += share * rel
            size[g] += share
    means = {g: total[g] / size[g] for g in universe}
    if math.fsum(means.values()) <= 0:
        raise DistributionError(f"topic {topic.topic_id!r} has no relevant documents; relevance-proportional target undefined")
    return GroupDistribution.from_weights(means)


def _explicit(topic: Topic, notion, universe) -> GroupDistribution:
    mass = notion.as_dict() if isinstance(notion, GroupDistribution) else {g: float(m) for g, m in notion.items()}
    total = math.fsum(mass.values())
    if any(m < 0 for m in mass.values()) or abs(total - 1.0) > FILE_SUM_TOLERANCE:
        raise DistributionError(f"explicit distribution must be non-negative and sum to 1 (+/- 1e-6), got {total!r}")
    if OTHER_GROUP in universe and OTHER_GROUP not in mass:
        raise DistributionError(
            f"topic {topic.topic_id!r} has ungrouped documents; the explicit distribution must list {OTHER_GROUP!r}"
        )
    return GroupDistribution.from_weights(mass, universe)


@dataclass(frozen=True)
class MetricConfig:
    alpha: float = 0.5
    persistence_p: float = 0.8
    cutoffs: tuple = (10, 20, 50)
    kl_smoothing_eta: float = 0.0
    binary_relevance: bool = True
    exact_idcg_max: int = 0

    def __post_init__(self):
        object.__setattr__(self, "cutoffs", tuple(int(k) for k in self.cutoffs))
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0 < self.persistence_p < 1:
            raise ValueError(f"persistence p must lie in (0, 1), got {self.persistence_p}")
        if not 0 <= self.kl_smoothing_eta < 1:
            raise ValueError(f"eta must lie in [0, 1), got {self.kl_smoothing_eta}")
        if any(k < 1 for k in self.cutoffs):
            raise ValueError(f"cutoffs must be positive, got {self.cutoffs}")
