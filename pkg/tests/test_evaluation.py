import math

import numpy as np
import pytest

import oracles
from fairir import (
    GroupDistribution,
    MetricConfig,
    alpha_ndcg,
    fair_alpha_ndcg,
    fair_ratio,
    fair_rbp,
    feasibility,
    kl_at,
    ndcg,
    ndkl,
    ndrkl,
    rbp,
    skew,
)
from fairir.evaluation import METRICS, TopicEvaluator, evaluate
from fairir.io import SynthSpec, generate_synthetic


def reference(name, items, t, desired, cfg, k):
    """Value of one metric from the standalone metric functions."""
    eta = cfg.kl_smoothing_eta
    if name == "fair":
        return fair_alpha_ndcg(items, t, desired, cfg, k)
    if name == "alpha_ndcg":
        return alpha_ndcg(items, t, cfg, k)
    if name == "ndcg":
        return ndcg(items, t, k)
    if name == "fair_ndcg":
        return fair_ratio(ndcg(items, t, k), items, t, desired, k, eta)
    if name == "rbp":
        return rbp(items, t, cfg.persistence_p, k)
    if name == "fair_rbp":
        return fair_rbp(items, t, desired, cfg.persistence_p, k, eta)
    if name == "kl":
        return kl_at(items, t, desired, k, eta)
    if name == "ndkl":
        return ndkl(items, t, desired, k, eta)
    if name == "ndrkl":
        return ndrkl(items, t, desired, k, eta)
    if name == "min_skew":
        return skew(items, t, desired, k, eta).min_skew
    if name == "max_skew":
        return skew(items, t, desired, k, eta).max_skew
    f = feasibility(items, t, desired, k)
    return float(f.feasible_up_to if name == "feasible_up_to" else len(f.violated_positions))


@pytest.mark.parametrize("eta", [0.0, 0.05])
def test_evaluator_matches_metric_functions(eta):
    rng = np.random.default_rng(21)
    cfg = MetricConfig(kl_smoothing_eta=eta)
    for _ in range(60):
        n = int(rng.integers(1, 14))
        inst = oracles.make_instance(rng, n, int(rng.integers(1, 4)), int(rng.integers(1, 4)), ungrouped=True)
        t = oracles.to_topic(inst)
        desired = GroupDistribution(oracles.random_desired(rng, oracles.universe(inst)))
        items = [str(d) for d in rng.permutation(inst["ids"])]
        cutoffs = [1, 3, 5, 20]
        got = TopicEvaluator(t, desired, cfg).evaluate(items, METRICS, cutoffs)
        for name in METRICS:
            for k in cutoffs:
                want = reference(name, items, t, desired, cfg, k)
                value, flags = got[(name, k)]
                if math.isinf(want):
                    assert value == want
                else:
                    assert value == pytest.approx(want, abs=1e-12), (name, k)
                assert ("truncated" in flags) == (k > len(items))


def test_short_ranking_normalized_by_pool_ideal():
    rng = np.random.default_rng(5)
    inst = oracles.make_instance(rng, 8, 3, 2)
    t = oracles.to_topic(inst)
    desired = GroupDistribution(oracles.random_desired(rng, oracles.universe(inst)))
    items = inst["order"][:3]
    got = TopicEvaluator(t, desired, MetricConfig()).evaluate(items, ["alpha_ndcg", "ndcg", "fair_rbp"], [5])
    assert got[("alpha_ndcg", 5)][0] == pytest.approx(
        oracles.dcg(oracles.gains(inst, items, 0.5, 3)) / oracles.greedy_ideal_dcg(inst, 0.5, 5), abs=1e-12)
    ideal = oracles.dcg(sorted((oracles.topic_rel(inst, d) for d in inst["ids"]), reverse=True)[:5])
    assert got[("ndcg", 5)][0] == pytest.approx(
        oracles.dcg([oracles.topic_rel(inst, d) for d in items]) / ideal, abs=1e-12)
    assert "truncated" in got[("ndcg", 5)][1]


def test_evaluate_averages_runs_and_counts_degenerate():
    bundle = generate_synthetic(SynthSpec(topics=3, pool=10, base=0.0, beta=0.0, seed=1))
    t = bundle.topics
    rankings = {x.topic_id: [x.default_ranking, tuple(reversed(x.default_ranking))] for x in t}
    rows, series = evaluate("x", t, rankings, "uniform", ["kl", "fair"], [5])
    by = {r.metric: r for r in rows}
    assert by["fair"].excluded == 3 and "empty" in by["fair"].flags
    assert by["kl"].excluded == 0
    ev = TopicEvaluator(t[0], GroupDistribution({"g0": 0.5, "g1": 0.5}), MetricConfig())
    one = ev.evaluate(rankings[t[0].topic_id][0], ["kl"], [5])[("kl", 5)][0]
    two = ev.evaluate(rankings[t[0].topic_id][1], ["kl"], [5])[("kl", 5)][0]
    assert series["kl"].at(5)[t[0].topic_id] == pytest.approx((one + two) / 2)


def test_evaluator_rejects_foreign_and_repeated_docs():
    t = generate_synthetic(SynthSpec(topics=1, pool=5, seed=0)).topics[0]
    ev = TopicEvaluator(t, GroupDistribution({"g0": 0.5, "g1": 0.5}), MetricConfig())
    with pytest.raises(KeyError):
        ev.evaluate(["nope"], ["kl"], [1])
    d = t.doc_ids[0]
    with pytest.raises(ValueError):
        ev.evaluate([d, d], ["kl"], [2])
