"""Fairness-aware ranking evaluation: the FAIR metric, its utility and fairness
components, the FAIR epsilon-greedy re-ranker, and dataset/report I/O."""

import logging

from .core import (
    OTHER_GROUP,
    DistributionError,
    Document,
    GroupDistribution,
    Judgments,
    MetricConfig,
    PrefixState,
    Ranking,
    Topic,
    append_to_prefix,
    build_desired_distribution,
    prefix_distribution,
    prefix_state,
)
from .metrics import (
    InfiniteDivergenceError,
    RankProfile,
    alpha_ndcg,
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
from .rankers import (
    RankerConfig,
    build_proxy_judgments,
    epsilon_greedy,
    epsilon_greedy_runs,
    greedy_ideal_ranker,
    passthrough,
    with_proxy_judgments,
)
from .stats import (
    Correlation,
    MetricSeries,
    UndefinedCorrelationError,
    aggregate,
    correlate,
    pearson,
    significance_stars,
    spearman,
)

__version__ = "0.1.0"

logging.getLogger(__name__).addHandler(logging.NullHandler())
