"""
Scoring one ranking for utility and group fairness
===================================================

A toy topic with two groups. We score two orderings of the same documents
with alpha-nDCG, FAIR, KL@k, nDKL and nDRKL.
"""

from fairir import (
    Document,
    Judgments,
    MetricConfig,
    Topic,
    alpha_ndcg,
    build_desired_distribution,
    fair_alpha_ndcg,
    kl_at,
    ndkl,
    ndrkl,
)

# six documents: the "A" ones are all relevant, the "B" ones half of the time
docs = [Document(f"a{i}", {"A"}, i + 1) for i in range(3)] + [Document(f"b{i}", {"B"}, i + 4) for i in range(3)]
judgments = Judgments({("a0", "x"): 1, ("a1", "y"): 1, ("a2", "x"): 1, ("b0", "z"): 1, ("b2", "y"): 1})
topic = Topic("toy", frozenset({"x", "y", "z"}), docs, judgments, tuple(d.doc_id for d in docs))

# parity: both groups should get half of every prefix
desired = build_desired_distribution(topic, "uniform")
print("desired:", desired.as_dict())

cfg = MetricConfig(alpha=0.5)
blocked = ["a0", "a1", "a2", "b0", "b1", "b2"]
interleaved = ["a0", "b0", "a1", "b2", "a2", "b1"]

# FAIR divides every rank's gain by (KL of that prefix + 1), so the blocked
# ordering loses credit even though its utility is close
for name, ranking in (("blocked", blocked), ("interleaved", interleaved)):
    print(f"{name:12s} alpha-nDCG@6={alpha_ndcg(ranking, topic, cfg, 6):.4f}"
          f"  FAIR@6={fair_alpha_ndcg(ranking, topic, desired, cfg, 6):.4f}"
          f"  KL@3={kl_at(ranking, topic, desired, 3):.4f}"
          f"  nDKL@6={ndkl(ranking, topic, desired, 6):.4f}"
          f"  nDRKL@6={ndrkl(ranking, topic, desired, 6):.4f}")
