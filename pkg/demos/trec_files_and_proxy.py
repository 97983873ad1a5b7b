"""
From TREC-style files to a report
=================================

Write a synthetic dataset as qrels/run/groups text files, read them back,
evaluate the run, then evaluate the same run with judgments derived from
rank positions only.
"""

import tempfile
from pathlib import Path

from fairir.evaluation import default_rankings, evaluate
from fairir.io import SynthSpec, generate_synthetic, load_dataset, render_report, write_trec
from fairir.rankers import with_proxy_judgments

workdir = Path(tempfile.mkdtemp())
paths = write_trec(generate_synthetic(SynthSpec(topics=5, pool=30, prior=(0.7, 0.3), beta=0.5, seed=3)), workdir)
print(Path(paths["qrels"]).read_text().splitlines()[:3])
print(Path(paths["run"]).read_text().splitlines()[:3])

# candidates are the run's docs plus any other judged docs; parse warnings land in provenance
bundle = load_dataset(paths["qrels"], paths["run"], paths["groups"])
print("warnings:", bundle.warnings)
rows, _ = evaluate("run", bundle.topics, default_rankings(bundle), "collection",
                   ["fair", "fair_rbp", "kl", "ndrkl", "max_skew"], [10, 20])
print(render_report(rows))

# without qrels: grade each doc 1/log2(rank + 1) on its own groups
proxied = [with_proxy_judgments(t, "graded-log") for t in bundle.topics]
rows, _ = evaluate("run-proxy", proxied, default_rankings(bundle), "collection", ["fair", "kl"], [10])
print(render_report(rows))
