"""Evaluate rankings over many topics and summarize them as report rows."""

from __future__ import annotations

from typing import Mapping, Optional, Sequence

from . import metrics as M
from .core import GroupDistribution, MetricConfig, Ranking, Topic, build_desired_distribution
from .io import DatasetBundle, ReportRow
from .stats import MetricSeries, aggregate

UTILITY_METRICS = ("fair", "fair_rbp", "fair_ndcg", "alpha_ndcg", "ndcg", "rbp")
FAIRNESS_METRICS = ("kl", "ndkl", "ndrkl", "min_skew", "max_skew", "feasible_up_to", "violations")
METRICS = UTILITY_METRICS + FAIRNESS_METRICS


def check_metrics(names: Sequence[str]) -> list:
    unknown = [n for n in names if n not in METRICS]
    if unknown:
        raise ValueError(f"unknown metric(s) {unknown}; available: {', '.join(METRICS)}")
    return list(names)


def desired_for(topic: Topic, notion) -> GroupDistribution:
    return build_desired_distribution(topic, notion)


class TopicEvaluator:
    """Evaluates rankings of one topic.

    A ranking is walked once up to its largest cutoff; every metric at every
    cutoff is then read off that per-rank trace. Ideal DCGs and repeated
    rankings are cached.
    """

    def __init__(self, topic: Topic, desired: GroupDistribution, cfg: MetricConfig):
        self.topic = topic
        self.desired = desired
        self.cfg = cfg
        docs = topic.candidates
        self._rel = {d.doc_id: topic.relevance(d.doc_id) for d in docs}
        self.degenerate = not any(r > 0 for r in self._rel.values())
        self._aspects = {d.doc_id: topic.judgments.aspects_of(d.doc_id) for d in docs}
        self._shares = {d.doc_id: d.group_shares() for d in docs}
        self._ideal_rels = sorted(self._rel.values(), reverse=True)
        self._groups = M._universe(topic.group_universe(), desired)
        self._q = M.smooth(desired, cfg.kl_smoothing_eta, self._groups)
        self._idcg = {}
        self._rbp_ideal = {}
        self._cache = {}

    def idcg(self, k: int) -> float:
        if k not in self._idcg:
            self._idcg[k] = M._idcg(self.topic, k, self.cfg)
        return self._idcg[k]

    def rbp_ideal(self, k: int) -> float:
        if k not in self._rbp_ideal:
            self._rbp_ideal[k] = M.rbp_ideal(self.topic, self.cfg.persistence_p, k)
        return self._rbp_ideal[k]

    def _trace(self, items: tuple, depth: int, cutoffs: set):
        """Per-rank gains, relevances, prefix KLs, floor violations and group counts at ``cutoffs``."""
        decay = 1.0 - self.cfg.alpha
        coverage, counts = {}, {}
        gains, rels, kls, violated, snapshots = [], [], [], [], {}
        seen = set()
        for i, doc_id in enumerate(items[:depth], start=1):
            if doc_id in seen:
                raise ValueError(f"{doc_id!r} is already in the prefix")
            seen.add(doc_id)
            if doc_id not in self._aspects:
                raise KeyError(f"{doc_id!r} is not a candidate of topic {self.topic.topic_id!r}")
            aspects = self._aspects[doc_id]
            gains.append(sum(grade * decay ** coverage.get(a, 0.0) for a, grade in aspects.items()))
            for a, grade in aspects.items():
                coverage[a] = coverage.get(a, 0.0) + grade
            for g, share in self._shares[doc_id].items():
                counts[g] = counts.get(g, 0.0) + share
            rels.append(self._rel[doc_id])
            kls.append(M._kl_against({g: c / i for g, c in counts.items()}, self._q, self._groups))
            if M._below_floor(counts, i, self.desired):
                violated.append(i)
            if i in cutoffs:
                snapshots[i] = dict(counts)
        return gains, rels, kls, violated, snapshots

    def evaluate(self, ranking, metrics: Sequence[str], cutoffs: Sequence[int]) -> dict:
        """``(metric, k) -> (value, flags)`` for one ranking."""
        items = ranking.items if isinstance(ranking, Ranking) else tuple(ranking)
        key = (items, tuple(metrics), tuple(cutoffs))
        if key in self._cache:
            return self._cache[key]
        cfg, topic, desired = self.cfg, self.topic, self.desired
        if not items:
            raise ValueError("cannot evaluate an empty ranking")
        keffs = {min(k, len(items)) for k in cutoffs}
        gains, rels, kls, violated, snapshots = self._trace(items, max(keffs), keffs)
        p = cfg.persistence_p
        out = {}
        for k in cutoffs:
            keff = min(k, len(items))
            base_flags = {"truncated"} if k > len(items) else set()
            discounts = [M.discount(i) for i in range(1, keff + 1)]
            z = M._z(keff, "log")
            kl_k = kls[keff - 1]
            # a ranking shorter than k is normalized against an ideal that fills k from the pool
            kpool = min(k, len(topic.candidates))
            idcg = self.idcg(kpool)
            total = sum(g / d for g, d in zip(gains, discounts))
            values = {}
            for name in metrics:
                if name == "fair":
                    fair = sum(g / (kl + 1.0) / d for g, kl, d in zip(gains, kls, discounts))
                    values[name] = fair / idcg if idcg > 0 else 0.0
                elif name == "alpha_ndcg":
                    values[name] = total / idcg if idcg > 0 else 0.0
                elif name in ("ndcg", "fair_ndcg"):
                    ideal = M.dcg(self._ideal_rels, kpool)
                    nd = sum(r / d for r, d in zip(rels, discounts)) / ideal if ideal > 0 else 0.0
                    values[name] = nd if name == "ndcg" else nd / (kl_k + 1.0)
                elif name == "rbp":
                    for doc_id in items[:keff]:
                        M._rbp_relevance(topic, doc_id)
                    values[name] = (1 - p) * sum(r * p ** i for i, r in enumerate(rels[:keff]))
                elif name == "fair_rbp":
                    m = self.rbp_ideal(kpool)
                    values[name] = 0.0 if m <= 0 else sum(
                        (1 - p) * r * p ** i / (kl + 1.0) for i, (r, kl) in enumerate(zip(rels[:keff], kls))) / m
                elif name == "kl":
                    values[name] = kl_k
                elif name == "ndkl":
                    values[name] = sum(kl / d for kl, d in zip(kls, discounts)) / z
                elif name == "ndrkl":
                    values[name] = sum(1.0 / (kl + 1.0) / d for kl, d in zip(kls, discounts)) / z
                elif name in ("min_skew", "max_skew"):
                    sk = M._skew_from_counts(snapshots[keff], keff, self._groups, desired, cfg.kl_smoothing_eta)
                    values[name] = sk.min_skew if name == "min_skew" else sk.max_skew
                elif name == "feasible_up_to":
                    first = next((i for i in violated if i <= keff), keff + 1)
                    values[name] = float(first - 1)
                elif name == "violations":
                    values[name] = float(sum(1 for i in violated if i <= keff))
            for name, value in values.items():
                flags = set(base_flags)
                if name in UTILITY_METRICS and self.degenerate:
                    flags.add("degenerate")
                if name in ("fair", "alpha_ndcg") and idcg > 0 and total > idcg + M.TIE_TOLERANCE:
                    flags.add("exceeds_ideal")
                out[(name, k)] = (value, flags)
        self._cache[key] = out
        return out


def evaluate(
    algorithm: str,
    topics: Sequence[Topic],
    rankings: Mapping,
    notion,
    metrics: Sequence[str],
    cutoffs: Sequence[int],
    cfg: MetricConfig = MetricConfig(),
    evaluators: Optional[dict] = None,
) -> tuple:
    """Evaluate ``rankings`` (``topic_id -> Ranking`` or list of rankings per run).

    Runs of a topic are averaged before aggregating over topics. Returns the
    report rows and the per-topic :class:`MetricSeries` keyed by metric.
    Topics are processed in sorted id order so the output does not depend on
    input order.
    """
    metrics = check_metrics(metrics)
    series = {m: MetricSeries(m) for m in metrics}
    flags = {(m, k): set() for m in metrics for k in cutoffs}
    evaluators = {} if evaluators is None else evaluators
    for topic in sorted(topics, key=lambda t: str(t.topic_id)):
        if topic.topic_id not in rankings:
            continue
        runs = rankings[topic.topic_id]
        if isinstance(runs, (Ranking, tuple)):
            runs = [runs]
        ev = evaluators.get(topic.topic_id)
        if ev is None:
            ev = evaluators[topic.topic_id] = TopicEvaluator(topic, desired_for(topic, notion), cfg)
        results = [ev.evaluate(r, metrics, cutoffs) for r in runs]
        for m in metrics:
            for k in cutoffs:
                vals = [res[(m, k)][0] for res in results]
                fl = set().union(*(res[(m, k)][1] for res in results))
                flags[(m, k)] |= fl - {"degenerate"}
                series[m].add(topic.topic_id, k, sum(vals) / len(vals), degenerate="degenerate" in fl)
    rows = []
    for m in metrics:
        for k in cutoffs:
            s = series[m]
            excluded = s.excluded.get(k, 0)
            if s.at(k):
                mean, lo, hi = (aggregate(s, how, k) for how in ("mean", "min", "max"))
            else:
                mean = lo = hi = float("nan")
                flags[(m, k)].add("empty")
            fl = set(flags[(m, k)])
            if excluded:
                fl.add("degenerate")
            rows.append(ReportRow(algorithm, m, k, mean, lo, hi, excluded, tuple(sorted(fl))))
    return rows, series


def default_rankings(bundle: DatasetBundle) -> dict:
    return {t.topic_id: Ranking(t.default_ranking) for t in bundle.topics if t.default_ranking}
