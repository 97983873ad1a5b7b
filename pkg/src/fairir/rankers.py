"""Re-rankers: FAIR epsilon-greedy, the greedy alpha-nDCG ideal, and pass-through.

The epsilon-greedy ranker builds the top-k one rank at a time. With
probability ``1 - epsilon`` it exploits: it keeps the remaining documents that
maximize ``gain / (kl + 1)`` and, among those, takes the one with the lowest
prefix KL. Otherwise it explores: it keeps the documents that minimize the
prefix KL and takes the one with the largest gain. The prefix KL is always
evaluated with the candidate already placed. Remaining ties go to the lower
default rank, then the smaller doc id.

Scores are computed on dense numpy arrays per topic. Because the random draws
only select a branch, the ranking is fully determined by the branch sequence;
repeated runs on one topic share their step decisions through a cache.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    GroupDistribution,
    Judgments,
    MetricConfig,
    Ranking,
    Topic,
)
from .metrics import TIE_TOLERANCE, InfiniteDivergenceError, greedy_ideal, smooth

RELEVANCE_MODES = ("judged", "proxy")


@dataclass(frozen=True)
class RankerConfig:
    epsilon: float = 0.0
    k: int = 10
    seed: int = 0
    runs: int = 1
    relevance_mode: str = "judged"

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.runs < 1:
            raise ValueError(f"runs must be >= 1, got {self.runs}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.relevance_mode not in RELEVANCE_MODES:
            raise ValueError(f"relevance_mode must be one of {RELEVANCE_MODES}")


def topic_key(topic_id: str) -> int:
    """Stable 64-bit key of a topic id, independent of PYTHONHASHSEED."""
    return int.from_bytes(hashlib.blake2b(str(topic_id).encode("utf-8"), digest_size=8).digest(), "little")


def run_rng(seed: int, run: int, topic_id: str) -> np.random.Generator:
    """Independent PCG64 stream for one (seed, run, topic) triple."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(topic_key(topic_id), run)))


class _GreedyState:
    """Dense matrices of one topic plus a cache of step decisions keyed by prefix."""

    def __init__(self, topic: Topic, desired: GroupDistribution, alpha: float, eta: float):
        self.topic = topic
        docs = sorted(topic.candidates, key=lambda d: topic.tie_key(d.doc_id))
        self.doc_ids = [d.doc_id for d in docs]
        aspects = sorted(topic.aspects, key=str)
        groups = sorted(set(topic.group_universe()) | set(desired.mass), key=str)
        a_index = {a: j for j, a in enumerate(aspects)}
        g_index = {g: j for j, g in enumerate(groups)}
        n = len(docs)
        self.judged = np.zeros((n, len(aspects)))
        self.shares = np.zeros((n, len(groups)))
        for i, doc in enumerate(docs):
            for a, grade in topic.judgments.aspects_of(doc.doc_id).items():
                self.judged[i, a_index[a]] = grade
            for g, share in doc.group_shares().items():
                self.shares[i, g_index[g]] = share
        target = smooth(desired, eta, groups)
        self.target = np.array([target[g] for g in groups])
        blocked = self.target <= 0
        if np.any(self.shares[:, blocked] > 0):
            bad = [groups[j] for j in np.flatnonzero(blocked) if np.any(self.shares[:, j] > 0)]
            raise InfiniteDivergenceError(
                f"infinite divergence: desired distribution excludes an observed group ({bad[0]!r})"
            )
        self.log_target = np.log(np.where(blocked, 1.0, self.target))
        self.decay = 1.0 - alpha
        # row order is already the tie order, so the first surviving index wins
        self._states = {(): (np.zeros(len(aspects)), np.zeros(len(groups)), np.ones(n, dtype=bool))}
        self._decisions = {}

    def scores(self, prefix: tuple):
        """Gains and prefix KLs of every remaining document appended to ``prefix``."""
        coverage, counts, remaining = self._states[prefix]
        idx = np.flatnonzero(remaining)
        gains = self.judged[idx] @ (self.decay ** coverage)
        p = (counts + self.shares[idx]) / (len(prefix) + 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(p > 0, p * (np.log(p) - self.log_target), 0.0)
        kls = np.maximum(terms.sum(axis=1), 0.0)
        return idx, gains, kls

    def choose(self, prefix: tuple, explore: bool) -> int:
        key = (prefix, explore)
        hit = self._decisions.get(key)
        if hit is not None:
            return hit
        idx, gains, kls = self.scores(prefix)
        if explore:
            keep = kls <= kls.min() + TIE_TOLERANCE
            sub = gains[keep]
            pick = idx[keep][sub >= sub.max() - TIE_TOLERANCE][0]
        else:
            value = gains / (kls + 1.0)
            keep = value >= value.max() - TIE_TOLERANCE
            sub = kls[keep]
            pick = idx[keep][sub <= sub.min() + TIE_TOLERANCE][0]
        pick = int(pick)
        self._decisions[key] = pick
        child = prefix + (pick,)
        if child not in self._states:
            coverage, counts, remaining = self._states[prefix]
            remaining = remaining.copy()
            remaining[pick] = False
            self._states[child] = (coverage + self.judged[pick], counts + self.shares[pick], remaining)
        return pick

    def rank(self, k: int, epsilon: float, rng: Optional[np.random.Generator]) -> Ranking:
        depth = min(k, len(self.doc_ids))
        prefix = ()
        explored = []
        for _ in range(depth):
            if epsilon >= 1.0:
                explore = True
            elif epsilon <= 0.0:
                explore = False
            else:
                explore = bool(rng.random() < epsilon)
            explored.append(explore)
            prefix = prefix + (self.choose(prefix, explore),)
        return Ranking(tuple(self.doc_ids[i] for i in prefix), truncated=k > len(self.doc_ids),
                       explored=tuple(explored))


def epsilon_greedy(topic: Topic, desired: GroupDistribution, cfg: RankerConfig = RankerConfig(),
                   mcfg: MetricConfig = MetricConfig(), run: int = 0) -> Ranking:
    """Rank ``topic`` with FAIR epsilon-greedy; ``run`` selects the random stream.

    For ``epsilon`` in {0, 1} no random draws are made and the result does not
    depend on the seed.
    """
    if not topic.candidates:
        raise ValueError(f"topic {topic.topic_id!r} has an empty candidate pool")
    state = _GreedyState(topic, desired, mcfg.alpha, mcfg.kl_smoothing_eta)
    return state.rank(cfg.k, cfg.epsilon, run_rng(cfg.seed, run, topic.topic_id))


def epsilon_greedy_runs(topic: Topic, desired: GroupDistribution, cfg: RankerConfig,
                        mcfg: MetricConfig = MetricConfig()) -> list:
    """``cfg.runs`` seeded repetitions; run ``r`` equals ``epsilon_greedy(..., run=r)``."""
    if not topic.candidates:
        raise ValueError(f"topic {topic.topic_id!r} has an empty candidate pool")
    state = _GreedyState(topic, desired, mcfg.alpha, mcfg.kl_smoothing_eta)
    deterministic = cfg.epsilon in (0.0, 1.0)
    out = []
    for r in range(cfg.runs):
        if deterministic and out:
            out.append(out[0])
            continue
        out.append(state.rank(cfg.k, cfg.epsilon, run_rng(cfg.seed, r, topic.topic_id)))
    return out


def greedy_ideal_ranker(topic: Topic, k: int, alpha: float = 0.5) -> Ranking:
    """The greedy ideal alpha-nDCG ordering, as used for IDCG."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return Ranking(tuple(greedy_ideal(topic, k, alpha)), truncated=k > len(topic.candidates))


def passthrough(topic: Topic, k: int) -> Ranking:
    """First ``k`` items of the provider's default ranking."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not topic.default_ranking:
        raise ValueError(f"topic {topic.topic_id!r} has no default ranking")
    return Ranking(topic.default_ranking[:k], truncated=k > len(topic.default_ranking))


PROXIES = ("graded-log", "binary-top", "uniform")


def parse_proxy(proxy: str) -> tuple:
    """Parse ``graded-log``, ``uniform`` or ``binary-top:N`` into ``(kind, n)``."""
    kind, _, arg = str(proxy).partition(":")
    if kind == "binary-top":
        try:
            n = int(arg)
        except ValueError:
            raise ValueError(f"binary-top proxy needs a count, e.g. binary-top:10 (got {proxy!r})") from None
        if n < 0:
            raise ValueError("binary-top count must be >= 0")
        return kind, n
    if kind in ("graded-log", "uniform") and not arg:
        return kind, None
    raise ValueError(f"unknown proxy {proxy!r}; choose graded-log, binary-top:N or uniform")


def build_proxy_judgments(topic: Topic, proxy: str = "graded-log") -> Judgments:
    """Relevance grades derived from the default ranking when no judgments exist.

    Every listed document is graded on each of its own groups, which stand in
    for aspects. ``graded-log`` gives ``1 / log2(rank + 1)``; ``binary-top:N``
    gives 1 to the first N documents; ``uniform`` gives 1 to all of them.
    """
    kind, n = parse_proxy(proxy)
    if not topic.default_ranking:
        raise ValueError(f"proxy judgments need a default ranking; topic {topic.topic_id!r} has none")
    table = {}
    for rank, doc_id in enumerate(topic.default_ranking, start=1):
        if kind == "graded-log":
            grade = 1.0 / math.log2(rank + 1)
        elif kind == "binary-top":
            grade = 1.0 if rank <= n else 0.0
        else:
            grade = 1.0
        for g in topic.doc(doc_id).effective_groups:
            table[(doc_id, g)] = grade
    return Judgments(table, binary=kind != "graded-log")


def with_proxy_judgments(topic: Topic, proxy: str = "graded-log") -> Topic:
    """``topic`` with proxy judgments and its group universe as the aspect set."""
    return topic.with_judgments(build_proxy_judgments(topic, proxy), aspects=topic.group_universe())
