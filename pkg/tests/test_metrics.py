import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

import oracles
from fairir import (
    Document,
    GroupDistribution,
    InfiniteDivergenceError,
    Judgments,
    MetricConfig,
    PrefixState,
    Topic,
    alpha_ndcg,
    build_desired_distribution,
    dcg,
    fair_alpha_ndcg,
    fair_ratio,
    fair_rbp,
    feasibility,
    gain,
    ideal_dcg,
    kl_at,
    kl_divergence,
    ndcg,
    ndkl,
    ndrkl,
    rank_profile,
    rbp,
    skew,
)
from fairir.metrics import prefix_kls

LN2 = math.log(2)
HALF = GroupDistribution({"A": 0.5, "B": 0.5})


@pytest.fixture
def two_doc_topic():
    """d1 in group A covers a1, d2 in group B covers b1."""
    docs = [Document("d1", {"A"}, 1), Document("d2", {"B"}, 2)]
    j = Judgments({("d1", "a1"): 1, ("d2", "b1"): 1}, binary=True)
    return Topic("q", frozenset({"a1", "b1"}), docs, j, ("d1", "d2"))


def _grouped_topic(groups, relevant=None):
    docs = [Document(f"d{i}", {g}, i + 1) for i, g in enumerate(groups)]
    relevant = range(len(groups)) if relevant is None else relevant
    j = Judgments({(f"d{i}", "a"): 1 for i in relevant}, binary=True)
    return Topic("q", frozenset({"a"}), docs, j, tuple(d.doc_id for d in docs))


# -- kl_divergence ---------------------------------------------------------

def test_kl_identical_is_zero():
    assert kl_divergence(HALF, HALF) == 0.0


def test_kl_point_mass_vs_uniform():
    assert kl_divergence({"A": 1.0, "B": 0.0}, HALF) == pytest.approx(0.693147, abs=1e-6)


def test_kl_three_quarters():
    # 0.75 ln 1.5 + 0.25 ln 0.5
    assert kl_divergence({"A": 0.75, "B": 0.25}, HALF) == pytest.approx(0.130812, abs=1e-6)


def test_kl_infinite_raises():
    with pytest.raises(InfiniteDivergenceError, match="infinite divergence"):
        kl_divergence({"A": 0.5, "B": 0.5}, {"A": 1.0})


def test_kl_smoothing_avoids_infinity():
    value = kl_divergence({"A": 0.5, "B": 0.5}, {"A": 1.0, "B": 0.0}, eta=0.1)
    q = {"A": 0.9 + 0.05, "B": 0.05}
    assert value == pytest.approx(0.5 * math.log(0.5 / q["A"]) + 0.5 * math.log(0.5 / q["B"]), abs=1e-12)


def _dists(n):
    return st.lists(st.floats(0.0, 1.0), min_size=n, max_size=n).filter(lambda w: sum(w) > 1e-3)


@given(_dists(4), _dists(4))
def test_kl_nonnegative_and_zero_on_self(w1, w2):
    keys = "ABCD"
    p = {k: x / sum(w1) for k, x in zip(keys, w1)}
    q = {k: x / sum(w2) for k, x in zip(keys, w2)}
    assert kl_divergence(p, p) == pytest.approx(0.0, abs=1e-12)
    assume(all(q[k] > 0 for k in keys if p[k] > 0))
    assert kl_divergence(p, q) >= 0.0


# -- gain / dcg ------------------------------------------------------------

def test_gain_two_unseen_aspects():
    j = Judgments({("d", "a1"): 1, ("d", "a2"): 1})
    assert gain(Document("d"), PrefixState(), j, 0.5) == 2.0


def test_gain_decays_with_coverage():
    j = Judgments({("d", "a1"): 1})
    assert gain(Document("d"), PrefixState({"a1": 1.0}), j, 0.5) == 0.5


def test_gain_mixed_coverage():
    j = Judgments({("d", "a1"): 1, ("d", "a3"): 1})
    assert gain(Document("d"), PrefixState({"a1": 2.0, "a3": 0.0}), j, 0.5) == 1.25


@given(st.floats(0.01, 0.99), st.integers(0, 6), st.integers(0, 6))
def test_gain_monotone_in_coverage(alpha, r1, r2):
    j = Judgments({("d", "a"): 1, ("d", "b"): 2})
    lo, hi = sorted((r1, r2))
    g_lo = gain(Document("d"), PrefixState({"a": float(lo), "b": 1.0}), j, alpha)
    g_hi = gain(Document("d"), PrefixState({"a": float(hi), "b": 1.0}), j, alpha)
    assert g_hi <= g_lo


def test_dcg_examples():
    assert dcg([1.0]) == 1.0
    assert dcg([2.0, 0.5], 2) == pytest.approx(2.315465, abs=1e-6)
    assert dcg([0.0, 0.0, 0.0]) == 0.0


# -- ideal dcg -------------------------------------------------------------

def test_ideal_two_distinct_aspects(two_doc_topic):
    value, order = ideal_dcg(two_doc_topic, 2, 0.5)
    assert value == pytest.approx(1.630930, abs=1e-6)
    assert sorted(order) == ["d1", "d2"]


def test_ideal_greedy_picks_dominant_doc_first():
    docs = [Document("x", {"A"}, 1), Document("y", {"A"}, 2), Document("all", {"B"}, 3)]
    j = Judgments({("x", "a1"): 1, ("y", "a2"): 1, ("all", "a1"): 1, ("all", "a2"): 1, ("all", "a3"): 1})
    t = Topic("q", frozenset({"a1", "a2", "a3"}), docs, j)
    assert ideal_dcg(t, 3, 0.5)[1][0] == "all"


def test_ideal_exact_bound():
    t = _grouped_topic(["A"] * 12)
    with pytest.raises(ValueError):
        ideal_dcg(t, 3, 0.5, mode="exact")


def test_ideal_exact_matches_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(25):
        inst = oracles.make_instance(rng, int(rng.integers(2, 7)), int(rng.integers(1, 4)), 2, graded=True)
        t = oracles.to_topic(inst)
        k = int(rng.integers(1, len(inst["ids"]) + 1))
        exact, order = ideal_dcg(t, k, 0.5, mode="exact")
        assert exact == pytest.approx(oracles.exact_ideal_dcg(inst, 0.5, k), abs=1e-12)
        assert oracles.dcg(oracles.gains(inst, order, 0.5, k)) == pytest.approx(exact, abs=1e-12)
        greedy, _ = ideal_dcg(t, k, 0.5)
        assert greedy <= exact + 1e-12


# -- alpha-nDCG / nDCG / RBP ----------------------------------------------

def test_alpha_ndcg_of_ideal_is_one(two_doc_topic):
    _, order = ideal_dcg(two_doc_topic, 2, 0.5)
    assert alpha_ndcg(order, two_doc_topic, k=2) == pytest.approx(1.0)


def test_alpha_ndcg_symmetric_pair(two_doc_topic):
    assert alpha_ndcg(["d2", "d1"], two_doc_topic, k=2) == pytest.approx(1.0)


def test_alpha_ndcg_degenerate():
    t = _grouped_topic(["A", "B"], relevant=[])
    assert alpha_ndcg(["d0", "d1"], t, k=2) == 0.0
    profile = rank_profile(["d0", "d1"], t, HALF, k=2)
    assert "degenerate" in profile.flags


def test_alpha_ndcg_exact_mode_bounded():
    rng = np.random.default_rng(5)
    cfg = MetricConfig(exact_idcg_max=8)
    for _ in range(30):
        inst = oracles.make_instance(rng, int(rng.integers(2, 7)), 3, 2)
        t = oracles.to_topic(inst)
        for _ in range(3):
            order = list(rng.permutation(inst["ids"]))
            value = alpha_ndcg(order, t, cfg, k=len(order))
            assert 0.0 <= value <= 1.0 + 1e-12


def test_ndcg_examples():
    t = _grouped_topic(["A", "B"], relevant=[1])
    assert ndcg(["d1", "d0"], t, 2) == pytest.approx(1.0)
    assert ndcg(["d0", "d1"], t, 2) == pytest.approx(0.630930, abs=1e-6)
    single = _grouped_topic(["A", "B", "A"], relevant=[0])
    assert ndcg(["d0", "d1", "d2"], single, 3) == 1.0


def test_rbp_examples():
    t = _grouped_topic(["A", "A", "A"])
    assert rbp(["d0", "d1", "d2"], t, 0.8, 3) == pytest.approx(0.488, abs=1e-12)
    none = _grouped_topic(["A", "A"], relevant=[])
    assert rbp(["d0", "d1"], none, 0.8, 2) == 0.0
    first = _grouped_topic(["A", "A", "A"], relevant=[0])
    assert rbp(["d0", "d1", "d2"], first, 0.8, 3) == pytest.approx(0.2, abs=1e-12)


def test_rbp_rejects_grades_above_one():
    docs = [Document("x", {"A"})]
    t = Topic("q", frozenset({"a"}), docs, Judgments({("x", "a"): 3}))
    with pytest.raises(ValueError):
        rbp(["x"], t, 0.8, 1)


@given(st.lists(st.booleans(), min_size=1, max_size=15), st.floats(0.05, 0.95))
def test_rbp_monotone_in_k_and_below_one(rels, p):
    t = _grouped_topic(["A"] * len(rels), relevant=[i for i, r in enumerate(rels) if r])
    items = [f"d{i}" for i in range(len(rels))]
    values = [rbp(items, t, p, k) for k in range(1, len(rels) + 1)]
    assert all(b >= a for a, b in zip(values, values[1:]))
    assert values[-1] < 1.0


# -- FAIR variants ---------------------------------------------------------

def test_fair_reduces_to_alpha_ndcg_single_group():
    t = _grouped_topic(["G", "G", "G"], relevant=[0, 2])
    desired = GroupDistribution({"G": 1.0})
    items = ["d1", "d0", "d2"]
    assert fair_alpha_ndcg(items, t, desired, k=3) == pytest.approx(alpha_ndcg(items, t, k=3), abs=1e-15)


def test_fair_two_doc_example(two_doc_topic):
    # (1/(1+ln2) + (1/log2 3)/(0+1)) / (1 + 1/log2 3)
    value = fair_alpha_ndcg(["d1", "d2"], two_doc_topic, HALF, MetricConfig(alpha=0.5), k=2)
    assert value == pytest.approx(0.74899, abs=1e-5)


def test_fair_rbp_two_doc_example(two_doc_topic):
    assert fair_rbp(["d1", "d2"], two_doc_topic, HALF, 0.8, 2) == pytest.approx(0.772565, abs=1e-6)


def test_fair_rbp_without_bias_is_normalized_rbp():
    t = _grouped_topic(["G", "G", "G"], relevant=[1])
    desired = GroupDistribution({"G": 1.0})
    items = ["d0", "d1", "d2"]
    m = (1 - 0.8) * 1.0
    assert fair_rbp(items, t, desired, 0.8, 3) == pytest.approx(rbp(items, t, 0.8, 3) / m)


def test_fair_rbp_no_relevant():
    t = _grouped_topic(["A", "B"], relevant=[])
    assert fair_rbp(["d0", "d1"], t, HALF, 0.8, 2) == 0.0


def test_fair_ratio_examples():
    t = _grouped_topic(["A", "B"])
    assert fair_ratio(1.0, ["d0", "d1"], t, HALF, 2) == 1.0
    assert fair_ratio(0.8, ["d0"], t, HALF, 1) == pytest.approx(0.472493, abs=1e-6)
    assert fair_ratio(0.0, ["d0"], t, HALF, 1) == 0.0


def test_fair_never_exceeds_alpha_ndcg():
    rng = np.random.default_rng(2)
    for _ in range(50):
        inst = oracles.make_instance(rng, 8, 3, 3)
        t = oracles.to_topic(inst)
        desired = build_desired_distribution(t, "uniform")
        order = list(rng.permutation(inst["ids"]))
        assert fair_alpha_ndcg(order, t, desired, k=6) <= alpha_ndcg(order, t, k=6) + 1e-12


# -- nDKL / nDRKL ----------------------------------------------------------

def test_ndkl_examples():
    t = _grouped_topic(["A", "B", "A", "B"])
    assert ndkl(["d0", "d1"], t, HALF, 2) > 0  # first prefix is all-A
    assert ndkl(["d0"], t, HALF, 1) == pytest.approx(LN2, abs=1e-12)
    inst = {"ids": ["d0", "d1", "d2", "d3"], "groups": {"d0": ["A"], "d1": ["B"], "d2": ["A"], "d3": ["B"]}}
    expected = oracles.ndkl(inst, ["d0", "d1", "d2", "d3"], {"A": 0.5, "B": 0.5}, 4)
    assert ndkl(["d0", "d1", "d2", "d3"], t, HALF, 4) == pytest.approx(expected, abs=1e-12)


def test_ndkl_perfect_prefixes():
    docs = [Document("x", {"A", "B"}), Document("y", {"A", "B"})]
    t = Topic("q", frozenset({"a"}), docs)
    assert ndkl(["x", "y"], t, HALF, 2) == 0.0
    assert ndrkl(["x", "y"], t, HALF, 2) == 1.0


def test_ndrkl_examples():
    docs = [Document("ab", {"A", "B"}), Document("a", {"A"})]
    t = Topic("q", frozenset({"x"}), docs)
    assert prefix_kls(["ab", "a"], t, HALF) == pytest.approx([0.0, 0.130812], abs=1e-6)
    assert ndrkl(["ab", "a"], t, HALF, 2) == pytest.approx(0.95525, abs=1e-5)
    assert ndrkl(["a"], t, HALF, 1) == pytest.approx(0.590616, abs=1e-6)


@pytest.mark.parametrize("k", [1, 2, 5, 10])
def test_ndrkl_optimum_is_one(k):
    docs = [Document(f"d{i}", {"A", "B"}) for i in range(k)]
    t = Topic("q", frozenset({"x"}), docs)
    assert ndrkl([d.doc_id for d in docs], t, HALF, k) == pytest.approx(1.0, abs=1e-15)


def test_ndrkl_printed_normalizer_exceeds_one():
    docs = [Document("x", {"A", "B"}), Document("y", {"A", "B"})]
    t = Topic("q", frozenset({"a"}), docs)
    # the i * log2(i + 1) normalizer lets a perfectly fair list score above 1
    assert ndrkl(["x", "y"], t, HALF, 2, z_form="printed") == pytest.approx(
        (1 + 1 / math.log2(3)) / (1 + 1 / (2 * math.log2(3))), abs=1e-12)


def test_ndrkl_range_random():
    rng = np.random.default_rng(8)
    for _ in range(40):
        inst = oracles.make_instance(rng, 8, 2, 3)
        t = oracles.to_topic(inst)
        desired = GroupDistribution(oracles.random_desired(rng, oracles.universe(inst)))
        order = list(rng.permutation(inst["ids"]))
        value = ndrkl(order, t, desired, 8)
        kls = prefix_kls(order, t, desired, 8)
        assert 0.0 < value <= 1.0
        assert (value == pytest.approx(1.0, abs=1e-15)) == all(x == 0 for x in kls)
        assert (ndkl(order, t, desired, 8) == 0) == all(x == 0 for x in kls)


# -- skew / feasibility ----------------------------------------------------

def test_skew_matched_is_zero():
    t = _grouped_topic(["A", "B", "A", "B"])
    result = skew(["d0", "d1", "d2", "d3"], t, HALF, 4)
    assert result.per_group == {"A": 0.0, "B": 0.0}
    assert result.min_skew == result.max_skew == 0.0


def test_skew_seventy_percent():
    t = _grouped_topic(["A"] * 7 + ["B"] * 3)
    result = skew([f"d{i}" for i in range(10)], t, HALF, 10)
    assert result.per_group["A"] == pytest.approx(0.336472, abs=1e-6)
    assert result.max_skew == result.per_group["A"]


def test_skew_smoothed_extreme():
    t = _grouped_topic(["A", "A", "A", "B"])
    result = skew(["d0", "d1", "d2"], t, HALF, 3, eta=0.01)
    # observed (1, 0) -> (0.995, 0.005); desired stays (0.5, 0.5)
    assert result.per_group["A"] == pytest.approx(math.log(0.995 / 0.5), abs=1e-12)
    assert result.per_group["B"] == pytest.approx(math.log(0.005 / 0.5), abs=1e-12)
    assert result.min_skew < -4 < 0.6 < result.max_skew


def test_skew_zero_desired_mass_errors():
    t = _grouped_topic(["A", "B"])
    with pytest.raises(ValueError):
        skew(["d0", "d1"], t, GroupDistribution({"A": 1.0, "B": 0.0}), 2)


def test_feasibility_alternating():
    t = _grouped_topic(["A", "B", "A", "B"])
    f = feasibility(["d0", "d1", "d2", "d3"], t, HALF, 4)
    assert f.violated_positions == frozenset()
    assert f.feasible_up_to == 4


def test_feasibility_violation():
    t = _grouped_topic(["A", "A", "B"])
    f = feasibility(["d0", "d1", "d2"], t, HALF, 3)
    assert f.violated_positions == frozenset({2})
    assert f.feasible_up_to == 1


def test_feasibility_single_group_never_violated():
    t = _grouped_topic(["G"] * 5)
    f = feasibility([f"d{i}" for i in range(5)], t, GroupDistribution({"G": 1.0}), 5)
    assert f.violated_positions == frozenset() and f.feasible_up_to == 5


def test_feasibility_depends_on_prefix_set_only():
    t = _grouped_topic(["A", "A", "B", "B", "A", "B"])
    items = [f"d{i}" for i in range(6)]
    base = feasibility(items, t, HALF, 6)
    swapped = items[:4][::-1] + items[4:]
    other = feasibility(swapped, t, HALF, 6)
    assert (4 in base.violated_positions) == (4 in other.violated_positions)


# -- prefix property -------------------------------------------------------

def test_metrics_ignore_items_below_cutoff():
    rng = np.random.default_rng(4)
    for _ in range(20):
        inst = oracles.make_instance(rng, 9, 3, 2)
        t = oracles.to_topic(inst)
        desired = build_desired_distribution(t, "uniform")
        order = list(rng.permutation(inst["ids"]))
        k = 5
        mutated = order[:k] + list(rng.permutation(order[k:]))
        for fn in (
            lambda r: fair_alpha_ndcg(r, t, desired, k=k),
            lambda r: alpha_ndcg(r, t, k=k),
            lambda r: ndcg(r, t, k),
            lambda r: rbp(r, t, 0.8, k),
            lambda r: ndrkl(r, t, desired, k),
            lambda r: ndkl(r, t, desired, k),
            lambda r: kl_at(r, t, desired, k),
            lambda r: fair_rbp(r, t, desired, 0.8, k),
            lambda r: skew(r, t, desired, k, eta=0.01).max_skew,
            lambda r: feasibility(r, t, desired, k).feasible_up_to,
        ):
            assert fn(order) == fn(mutated)


def test_rank_profile_flags_truncation():
    t = _grouped_topic(["A", "B"])
    profile = rank_profile(["d0", "d1"], t, HALF, k=5)
    assert "truncated" in profile.flags
    assert profile.k == 2
