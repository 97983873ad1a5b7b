"""
Ideal orderings and fairness diagnostics
========================================

Greedy versus exact ideal alpha-DCG on small pools, then per-group skew and
prefix feasibility for a single ranking.
"""

import numpy as np

from fairir import Document, GroupDistribution, Judgments, Topic, feasibility, ideal_dcg, skew
from fairir.io import SynthSpec, generate_synthetic

# exact search is a subset dynamic program, fine for pools of about a dozen docs
rng = np.random.default_rng(0)
ratios = []
for seed in range(40):
    topic = generate_synthetic(SynthSpec(topics=1, pool=8, groups=2, aspects_per_group=2, seed=seed)).topics[0]
    greedy, _ = ideal_dcg(topic, 8, 0.5, "greedy")
    exact, _ = ideal_dcg(topic, 8, 0.5, "exact")
    if exact > 0:
        ratios.append(greedy / exact)
print(f"greedy/exact: min={min(ratios):.4f} mean={np.mean(ratios):.4f} over {len(ratios)} pools")

# skew: log ratio of observed to desired share at k; feasibility: floor(i * share) members by rank i
groups = ["A", "A", "A", "B", "A", "B", "A", "B", "B", "A"]
docs = [Document(f"d{i}", {g}, i + 1) for i, g in enumerate(groups)]
topic = Topic("q", frozenset({"x"}), docs, Judgments({}), tuple(d.doc_id for d in docs))
desired = GroupDistribution({"A": 0.5, "B": 0.5})
s = skew(topic.default_ranking, topic, desired, 10)
print("skew@10:", {g: round(v, 4) for g, v in s.per_group.items()}, "max:", round(s.max_skew, 4))
f = feasibility(topic.default_ranking, topic, desired, 10)
print("violated at ranks", sorted(f.violated_positions), "feasible up to", f.feasible_up_to)
