"""Utility, fairness and combined FAIR metrics for a single ranked list.

Utility metrics follow the usual IR definitions (alpha-nDCG with novelty decay,
nDCG on topic-level grades, rank-biased precision). Fairness is measured as the
KL-divergence between the group distribution of every ranking prefix and a
desired distribution; FAIR divides each rank's utility contribution by
``kl + 1`` before discounting and normalizing.

All functions are pure. A cutoff larger than the ranking is silently reduced to
the ranking length; :func:`rank_profile` reports that case as a flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .core import (
    Document,
    GroupDistribution,
    Judgments,
    MetricConfig,
    PrefixState,
    Ranking,
    Topic,
    append_to_prefix,
    prefix_distribution,
)

TIE_TOLERANCE = 1e-9
DEFAULT_EXACT_MAX = 10


class InfiniteDivergenceError(ValueError):
    """The desired distribution gives zero mass to a group that was observed."""


def _universe(*dists) -> list:
    out = set()
    for d in dists:
        out |= set(d.mass if isinstance(d, GroupDistribution) else d)
    return sorted(out, key=str)


def smooth(dist, eta: float, universe=None) -> dict:
    """Mix ``dist`` with the uniform distribution over ``universe``: ``(1 - eta) * d + eta / |U|``."""
    mass = dist.mass if isinstance(dist, GroupDistribution) else dist
    groups = _universe(mass, universe or ())
    if eta == 0:
        return {g: mass.get(g, 0.0) for g in groups}
    u = eta / len(groups)
    return {g: (1.0 - eta) * mass.get(g, 0.0) + u for g in groups}


def kl_divergence(d1, d2, eta: float = 0.0) -> float:
    """KL-divergence of ``d1`` from ``d2`` in nats.

    Groups missing from either side count as zero mass. When ``eta > 0`` the
    reference ``d2`` is smoothed towards uniform first. Raises
    :class:`InfiniteDivergenceError` instead of returning infinity.
    """
    if not 0 <= eta < 1:
        raise ValueError(f"eta must lie in [0, 1), got {eta}")
    p = d1.mass if isinstance(d1, GroupDistribution) else d1
    groups = _universe(p, d2)
    return _kl_against(p, smooth(d2, eta, groups), groups)


def _kl_against(p: Mapping, q: Mapping, groups: Sequence) -> float:
    """KL of ``p`` from an already smoothed ``q`` over ``groups``."""
    total = 0.0
    for g in groups:
        pg = p.get(g, 0.0)
        if pg <= 0:
            continue
        qg = q[g]
        if qg <= 0:
            raise InfiniteDivergenceError(
                f"infinite divergence: desired distribution excludes an observed group ({g!r})"
            )
        total += pg * math.log(pg / qg)
    # rounding can leave a tiny negative value for identical inputs
    return max(total, 0.0)


def discount(rank: int) -> float:
    """Position discount log2(rank + 1) for a 1-based rank."""
    return math.log2(rank + 1)


def gain(doc: Document, state: PrefixState, judgments: Judgments, alpha: float) -> float:
    """Novelty-decayed gain of placing ``doc`` after the prefix ``state``.

    Each aspect contributes its grade times ``(1 - alpha) ** r``, with ``r`` the
    judged coverage of that aspect already in the prefix.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    decay = 1.0 - alpha
    counts = state.aspect_counts
    return sum(grade * decay ** counts.get(a, 0.0) for a, grade in judgments.aspects_of(doc.doc_id).items())


def dcg(gains: Sequence[float], k: Optional[int] = None) -> float:
    k = len(gains) if k is None else min(k, len(gains))
    return sum(gains[i] / discount(i + 1) for i in range(k))


def ranking_gains(items: Sequence, topic: Topic, alpha: float, k: Optional[int] = None) -> list:
    k = len(items) if k is None else min(k, len(items))
    state = PrefixState()
    out = []
    for doc_id in items[:k]:
        doc = topic.doc(doc_id)
        out.append(gain(doc, state, topic.judgments, alpha))
        state = append_to_prefix(state, doc, topic.judgments)
    return out


def greedy_ideal(topic: Topic, k: int, alpha: float) -> list:
    """Greedy alpha-nDCG ideal ordering of length ``min(k, pool)``.

    At each rank the remaining document with the largest gain wins; gains within
    1e-9 tie and are broken by higher topic relevance, lower default rank, then
    doc id.
    """
    remaining = list(topic.candidates)
    state = PrefixState()
    order = []
    for _ in range(min(k, len(remaining))):
        scored = [(gain(d, state, topic.judgments, alpha), d) for d in remaining]
        best = max(g for g, _ in scored)
        tied = [d for g, d in scored if g >= best - TIE_TOLERANCE]
        pick = min(tied, key=lambda d: (-topic.relevance(d.doc_id),) + topic.tie_key(d.doc_id))
        order.append(pick.doc_id)
        remaining.remove(pick)
        state = append_to_prefix(state, pick, topic.judgments)
    return order


def _exact_ideal(topic: Topic, k: int, alpha: float) -> tuple:
    # The gain of the next document depends only on the set already placed, so
    # the best ordering follows from a dynamic program over subsets.
    docs = sorted(topic.candidates, key=lambda d: topic.tie_key(d.doc_id))
    n = len(docs)
    k = min(k, n)
    memo = {}

    def best(mask: int, state: PrefixState, depth: int):
        if depth == k:
            return 0.0, ()
        if mask in memo:
            return memo[mask]
        top = (-1.0, ())
        for j, doc in enumerate(docs):
            if mask & (1 << j):
                continue
            g = gain(doc, state, topic.judgments, alpha) / discount(depth + 1)
            rest, tail = best(mask | (1 << j), append_to_prefix(state, doc, topic.judgments), depth + 1)
            if g + rest > top[0] + TIE_TOLERANCE:
                top = (g + rest, (doc.doc_id,) + tail)
        memo[mask] = top
        return top

    value, order = best(0, PrefixState(), 0)
    return value, list(order)


def ideal_dcg(topic: Topic, k: int, alpha: float = 0.5, mode: str = "greedy",
              exact_max: int = DEFAULT_EXACT_MAX) -> tuple:
    """Ideal DCG at cutoff ``k`` and the ordering that attains it.

    ``mode="greedy"`` is the standard approximation; ``mode="exact"`` searches
    all orderings and is only allowed for pools of at most ``exact_max`` docs.
    """
    if mode == "greedy":
        order = greedy_ideal(topic, k, alpha)
        return dcg(ranking_gains(order, topic, alpha)), order
    if mode == "exact":
        if len(topic.candidates) > exact_max:
            raise ValueError(
                f"exact IDCG limited to pools of {exact_max} documents, topic {topic.topic_id!r} has {len(topic.candidates)}"
            )
        return _exact_ideal(topic, k, alpha)
    raise ValueError(f"unknown IDCG mode {mode!r}")


def _idcg(topic, k, cfg: MetricConfig):
    exact = cfg.exact_idcg_max and len(topic.candidates) <= cfg.exact_idcg_max
    return ideal_dcg(topic, k, cfg.alpha, "exact" if exact else "greedy",
                     exact_max=max(cfg.exact_idcg_max, 1))[0]


def _items(ranking) -> tuple:
    return ranking.items if isinstance(ranking, Ranking) else tuple(ranking)


def alpha_ndcg(ranking, topic: Topic, cfg: MetricConfig = MetricConfig(), k: Optional[int] = None,
               idcg: Optional[float] = None) -> float:
    """alpha-nDCG@k; 0 when the ideal DCG is 0. Not clipped at 1."""
    items = _items(ranking)
    k = len(items) if k is None else min(k, len(items))
    if idcg is None:
        idcg = _idcg(topic, k, cfg)
    if idcg <= 0:
        return 0.0
    return dcg(ranking_gains(items, topic, cfg.alpha, k)) / idcg


def ndcg(ranking, topic: Topic, k: Optional[int] = None) -> float:
    """Classical nDCG on topic-level grades (a doc's best aspect grade)."""
    items = _items(ranking)
    k = len(items) if k is None else min(k, len(items))
    ideal = sorted((topic.relevance(d.doc_id) for d in topic.candidates), reverse=True)
    idcg = dcg(ideal, k)
    if idcg <= 0:
        return 0.0
    return dcg([topic.relevance(d) for d in items[:k]]) / idcg


def _rbp_relevance(topic: Topic, doc_id: str) -> float:
    rel = topic.relevance(doc_id)
    if rel > 1:
        raise ValueError(f"RBP needs relevance in [0, 1]; {doc_id!r} has grade {rel} (use binary judgments)")
    return rel


def rbp(ranking, topic: Topic, p: float = 0.8, k: Optional[int] = None) -> float:
    """Rank-biased precision truncated at ``k``."""
    if not 0 < p < 1:
        raise ValueError(f"persistence p must lie in (0, 1), got {p}")
    items = _items(ranking)
    k = len(items) if k is None else min(k, len(items))
    return (1 - p) * sum(_rbp_relevance(topic, d) * p ** i for i, d in enumerate(items[:k]))


def rbp_ideal(topic: Topic, p: float, k: int) -> float:
    grades = sorted((_rbp_relevance(topic, d.doc_id) for d in topic.candidates), reverse=True)
    return (1 - p) * sum(g * p ** i for i, g in enumerate(grades[:k]))


def prefix_kls(ranking, topic: Topic, desired: GroupDistribution, k: Optional[int] = None,
               eta: float = 0.0) -> list:
    """KL-divergence of every top-i prefix from ``desired``, i = 1..k."""
    items = _items(ranking)
    k = len(items) if k is None else min(k, len(items))
    universe = topic.group_universe()
    state = PrefixState()
    out = []
    for doc_id in items[:k]:
        state = append_to_prefix(state, topic.doc(doc_id), topic.judgments)
        out.append(kl_divergence(prefix_distribution(state, universe), desired, eta))
    return out


def kl_at(ranking, topic: Topic, desired: GroupDistribution, k: Optional[int] = None, eta: float = 0.0) -> float:
    """KL-divergence of the full top-k group distribution."""
    items = _items(ranking)
    k = len(items) if k is None else min(k, len(items))
    if k == 0:
        raise ValueError("KL needs at least one ranked item")
    universe = topic.group_universe()
    state = PrefixState()
    for doc_id in items[:k]:
        state = append_to_prefix(state, topic.doc(doc_id), topic.judgments)
    return kl_divergence(prefix_distribution(state, universe), desired, eta)


def fair_alpha_ndcg(ranking, topic: Topic, desired: GroupDistribution, cfg: MetricConfig = MetricConfig(),
                    k: Optional[int] = None, idcg: Optional[float] = None) -> float:
    """FAIR with alpha-nDCG utility: per-rank gain over ``kl + 1``, discounted, divided by IDCG."""
    items = _items(ranking)
    k = len(items) if k is None else min(k, len(items))
    if idcg is None:
        idcg = _idcg(topic, k, cfg)
    if idcg <= 0:
        return 0.0
    gains = ranking_gains(items, topic, cfg.alpha, k)
    kls = prefix_kls(items, topic, desired, k, cfg.kl_smoothing_eta)
    return sum(g / (kl + 1.0) / discount(i + 1) for i, (g, kl) in enumerate(zip(gains, kls))) / idcg


def fair_rbp(ranking, topic: Topic, desired: GroupDistribution, p: float = 0.8, k: Optional[int] = None,
             eta: float = 0.0) -> float:
    """FAIR with RBP utility, normalized by the RBP of the ideal ordering at ``k``."""
    items = _items(ranking)
    k = len(items) if k is None else min(k, len(items))
    m = rbp_ideal(topic, p, k)
    if m <= 0:
        return 0.0
    kls = prefix_kls(items, topic, desired, k, eta)
    total = sum((1 - p) * _rbp_relevance(topic, d) * p ** i / (kl + 1.0)
                for i, (d, kl) in enumerate(zip(items[:k], kls)))
    return total / m


def fair_ratio(utility_score: float, ranking, topic: Topic, desired: GroupDistribution,
               k: Optional[int] = None, eta: float = 0.0) -> float:
    """FAIR for utilities without a per-rank form: ``utility / (kl@k + 1)``."""
    if utility_score < 0:
        raise ValueError("utility score must be non-negative")
    return utility_score / (kl_at(ranking, topic, desired, k, eta) + 1.0)


def _z(k: int, form: str) -> float:
    if form == "log":
        return sum(1.0 / discount(i) for i in range(1, k + 1))
    if form == "printed":
        return sum(1.0 / (i * discount(i)) for i in range(1, k + 1))
    raise ValueError(f"unknown normalizer form {form!r}")


def ndkl(ranking, topic: Topic, desired: GroupDistribution, k: Optional[int] = None, eta: float = 0.0) -> float:
    """Position-discounted mean prefix KL; 0 is perfectly fair."""
    kls = prefix_kls(ranking, topic, desired, k, eta)
    return sum(kl / discount(i + 1) for i, kl in enumerate(kls)) / _z(len(kls), "log")


def ndrkl(ranking, topic: Topic, desired: GroupDistribution, k: Optional[int] = None, eta: float = 0.0,
          z_form: str = "log") -> float:
    """Position-discounted mean of ``1 / (kl + 1)`` over prefixes; 1 is perfectly fair.

    ``z_form="log"`` normalizes by the sum of the discounts, which keeps the
    value in (0, 1]. ``z_form="printed"`` uses ``sum 1 / (i log2(i + 1))``
    instead, kept for comparison with published numbers.
    """
    kls = prefix_kls(ranking, topic, desired, k, eta)
    if not kls:
        raise ValueError("nDRKL needs at least one ranked item")
    return sum(1.0 / (kl + 1.0) / discount(i + 1) for i, kl in enumerate(kls)) / _z(len(kls), z_form)


@dataclass(frozen=True)
class SkewResult:
    per_group: Mapping
    min_skew: float
    max_skew: float


def skew(ranking, topic: Topic, desired: GroupDistribution, k: Optional[int] = None,
         eta: float = 0.0) -> SkewResult:
    """Log-ratio of each group's top-k share to its desired share.

    Both shares are smoothed by ``eta`` toward uniform. Without smoothing a
    group absent from the top-k has skew ``-inf``.
    """
    items = _items(ranking)
    k = len(items) if k is None else min(k, len(items))
    universe = _universe(topic.group_universe(), desired)
    state = PrefixState()
    for doc_id in items[:k]:
        state = append_to_prefix(state, topic.doc(doc_id), topic.judgments)
    return _skew_from_counts(state.group_counts, state.depth, universe, desired, eta)


def _skew_from_counts(counts: Mapping, depth: int, universe: Sequence, desired: GroupDistribution,
                      eta: float) -> SkewResult:
    if depth == 0:
        raise ValueError("skew needs at least one ranked item")
    observed = smooth({g: counts.get(g, 0.0) / depth for g in universe}, eta, universe)
    target = smooth(desired, eta, universe)
    per_group = {}
    for g in universe:
        if target[g] <= 0:
            raise ValueError(f"skew undefined: group {g!r} has zero desired mass (use eta > 0)")
        per_group[g] = math.log(observed[g] / target[g]) if observed[g] > 0 else -math.inf
    values = list(per_group.values())
    return SkewResult(per_group, min(values), max(values))


@dataclass(frozen=True)
class Feasibility:
    violated_positions: frozenset
    feasible_up_to: int


def feasibility(ranking, topic: Topic, desired: GroupDistribution, k: Optional[int] = None) -> Feasibility:
    """Check per-prefix floor constraints ``count_g(top-i) >= floor(i * desired_g)``."""
    items = _items(ranking)
    k = len(items) if k is None else min(k, len(items))
    state = PrefixState()
    violated = set()
    for i, doc_id in enumerate(items[:k], start=1):
        state = append_to_prefix(state, topic.doc(doc_id), topic.judgments)
        if _below_floor(state.group_counts, i, desired):
            violated.add(i)
    first = min(violated) if violated else k + 1
    return Feasibility(frozenset(violated), first - 1)


def _below_floor(counts: Mapping, i: int, desired: GroupDistribution) -> bool:
    """True when some group has fewer than ``floor(i * desired_g)`` members in the top-i."""
    for g, share in desired.mass.items():
        if counts.get(g, 0.0) + TIE_TOLERANCE < math.floor(i * share + TIE_TOLERANCE):
            return True
    return False


@dataclass(frozen=True)
class RankRecord:
    gain: float
    kl: float
    fair_term: float
    discount: float


@dataclass
class RankProfile:
    """Per-rank trace of one ranking at one cutoff, with its normalizers and flags."""

    per_rank: list
    dcg: float
    idcg: float
    rbp_ideal: float  # NaN when grades exceed 1
    z: float
    flags: set = field(default_factory=set)

    @property
    def k(self) -> int:
        return len(self.per_rank)

    @property
    def alpha_ndcg(self) -> float:
        return self.dcg / self.idcg if self.idcg > 0 else 0.0

    @property
    def fair(self) -> float:
        if self.idcg <= 0:
            return 0.0
        return sum(r.fair_term / r.discount for r in self.per_rank) / self.idcg

    @property
    def ndkl(self) -> float:
        return sum(r.kl / r.discount for r in self.per_rank) / self.z

    @property
    def ndrkl(self) -> float:
        return sum(1.0 / (r.kl + 1.0) / r.discount for r in self.per_rank) / self.z

    @property
    def kl(self) -> float:
        return self.per_rank[-1].kl


def rank_profile(ranking, topic: Topic, desired: GroupDistribution, cfg: MetricConfig = MetricConfig(),
                 k: Optional[int] = None, idcg: Optional[float] = None) -> RankProfile:
    """Evaluate gains and prefix KLs of ``ranking`` once, for reuse across metrics."""
    items = _items(ranking)
    flags = set()
    if k is None:
        k = len(items)
    if k > len(items):
        flags.add("truncated")
        k = len(items)
    if k == 0:
        raise ValueError("cannot profile an empty ranking")
    if idcg is None:
        idcg = _idcg(topic, k, cfg)
    gains = ranking_gains(items, topic, cfg.alpha, k)
    kls = prefix_kls(items, topic, desired, k, cfg.kl_smoothing_eta)
    records = [RankRecord(g, kl, g / (kl + 1.0), discount(i + 1)) for i, (g, kl) in enumerate(zip(gains, kls))]
    total = dcg(gains)
    if idcg <= 0:
        flags.add("degenerate")
    elif total > idcg + TIE_TOLERANCE:
        flags.add("exceeds_ideal")
    try:
        m = rbp_ideal(topic, cfg.persistence_p, k)
    except ValueError:
        m = math.nan
    return RankProfile(records, total, idcg, m, _z(k, "log"), flags)
