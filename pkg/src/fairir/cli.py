"""Command-line interface: ``fairir {evaluate,rerank,ideal,correlate,synth}``.

Exit codes: 0 on success, 1 on data errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import io
import logging
import os
import sys
from typing import Optional, Sequence

from . import io as fio
from .core import MetricConfig
from .evaluation import METRICS, default_rankings, desired_for, evaluate
from .rankers import RankerConfig, epsilon_greedy_runs, greedy_ideal_ranker, parse_proxy, with_proxy_judgments
from .stats import pearson, spearman

logger = logging.getLogger("fairir")


class DataError(Exception):
    pass


def _csv_ints(text: str) -> list:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"cutoffs must be positive integers, got {text!r}")
    return values


def _csv(text: str) -> list:
    return [x.strip() for x in text.split(",") if x.strip()]


def _add_input_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("input")
    g.add_argument("--bundle", help="dataset bundle (JSON) written by `fairir synth` or write_bundle")
    g.add_argument("--qrels", help="diversity qrels: topic subtopic docid judgment")
    g.add_argument("--run", help="run file: topic Q0 docid rank score tag")
    g.add_argument("--groups", help="group sidecar: docid group")
    g.add_argument("--proxy", help="derive judgments from the default ranking: graded-log | binary-top:N | uniform")
    g.add_argument("--graded", action="store_true", help="keep qrels grades as-is instead of binarizing")


def _add_metric_args(p: argparse.ArgumentParser, metrics_default: str) -> None:
    g = p.add_argument_group("metrics")
    g.add_argument("--desired", default="uniform",
                   help="target distribution: uniform | collection | relprop | file:PATH (default uniform)")
    g.add_argument("--metrics", type=_csv, default=_csv(metrics_default),
                   help=f"comma-separated metrics (default {metrics_default}); available: {','.join(METRICS)}")
    g.add_argument("--k", type=_csv_ints, default=[10, 20, 50], help="comma-separated cutoffs (default 10,20,50)")
    g.add_argument("--alpha", type=float, default=0.5, help="alpha-nDCG novelty decay (default 0.5)")
    g.add_argument("--p", type=float, default=0.8, help="RBP persistence (default 0.8)")
    g.add_argument("--eta", type=float, default=0.0, help="KL smoothing toward uniform (default 0)")
    g.add_argument("--exact-idcg-max", type=int, default=0,
                   help="use exact IDCG for pools up to this size (default 0: always greedy)")


def _add_output_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="output path (default: standard output)")
    p.add_argument("--format", choices=fio.REPORT_FORMATS, default="tsv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairir", description="Fairness-aware ranking evaluation and re-ranking.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="score the default ranking (run file or bundle)")
    _add_input_args(p)
    _add_metric_args(p, "fair,alpha_ndcg,ndcg,rbp,kl,ndrkl")
    _add_output_args(p)
    p.add_argument("--label", help="algorithm column value (default: run file stem or 'default')")

    p = sub.add_parser("rerank", help="re-rank with FAIR epsilon-greedy and score the result")
    _add_input_args(p)
    _add_metric_args(p, "fair,alpha_ndcg,kl,ndrkl,min_skew,max_skew,feasible_up_to")
    _add_output_args(p)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--runs", type=int, default=1000, help="repetitions for 0 < epsilon < 1 (default 1000)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--depth", type=int, help="ranking length (default: largest cutoff)")
    p.add_argument("--rankings-out", help="also write every produced ranking in run format")

    p = sub.add_parser("ideal", help="greedy ideal alpha-nDCG rankings as a run file")
    _add_input_args(p)
    _add_metric_args(p, "fair,alpha_ndcg,kl,ndrkl")
    p.add_argument("--out", help="run file path (default: standard output)")
    p.add_argument("--depth", type=int, help="ranking length (default: largest cutoff)")
    p.add_argument("--report", help="also write a metric report for the ideal rankings")
    p.add_argument("--format", choices=fio.REPORT_FORMATS, default="tsv")

    p = sub.add_parser("correlate", help="Pearson and Spearman correlation of one metric against others")
    _add_input_args(p)
    _add_metric_args(p, "fair")
    _add_output_args(p)
    p.add_argument("--base", default="fair", help="metric correlated against each of --against (default fair)")
    p.add_argument("--against", type=_csv, default=_csv("ndcg,rbp,kl,ndrkl"))

    p = sub.add_parser("synth", help="generate a seeded synthetic dataset")
    p.add_argument("--topics", type=int, default=100)
    p.add_argument("--pool", type=int, default=100)
    p.add_argument("--groups", type=int, default=2)
    p.add_argument("--prior", type=lambda s: tuple(float(x) for x in _csv(s)), help="comma-separated group prior")
    p.add_argument("--beta", type=float, default=0.0, help="relevance bias toward the majority group")
    p.add_argument("--base", type=float, default=0.5, help="relevance rate without bias")
    p.add_argument("--aspects-per-group", type=int, default=2)
    p.add_argument("--jitter", type=float, default=0.5, help="noise scale of the default ranking score")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="bundle path (JSON)")
    p.add_argument("--trec-dir", help="also write qrels/run/groups text files here")
    return parser


def _validate(parser, args) -> None:
    if args.command == "synth":
        try:
            fio.SynthSpec(topics=args.topics, pool=args.pool, groups=args.groups, prior=args.prior,
                          beta=args.beta, aspects_per_group=args.aspects_per_group, seed=args.seed,
                          base=args.base, jitter=args.jitter)
        except ValueError as exc:
            parser.error(str(exc))
        return
    try:
        args.mcfg = MetricConfig(alpha=args.alpha, persistence_p=args.p, cutoffs=tuple(args.k),
                                 kl_smoothing_eta=args.eta, binary_relevance=not args.graded,
                                 exact_idcg_max=args.exact_idcg_max)
    except ValueError as exc:
        parser.error(str(exc))
    unknown = [m for m in args.metrics + getattr(args, "against", []) + [getattr(args, "base", "fair")]
               if m not in METRICS]
    if unknown:
        parser.error(f"unknown metric(s): {', '.join(unknown)}")
    if args.proxy is not None:
        try:
            parse_proxy(args.proxy)
        except ValueError as exc:
            parser.error(str(exc))
    d = args.desired
    if not (d in ("uniform", "collection", "relprop") or d.startswith("file:")):
        parser.error(f"--desired must be uniform, collection, relprop or file:PATH, got {d!r}")
    if args.bundle and (args.qrels or args.run or args.groups):
        parser.error("--bundle cannot be combined with --qrels/--run/--groups")
    if args.command == "rerank":
        if not 0 <= args.epsilon <= 1:
            parser.error(f"--epsilon must lie in [0, 1], got {args.epsilon}")
        if args.runs < 1:
            parser.error("--runs must be >= 1")
        if not 0 <= args.seed < 2 ** 64:
            parser.error("--seed must be an unsigned 64-bit integer")
    if getattr(args, "depth", None) is not None and args.depth < 1:
        parser.error("--depth must be >= 1")


def _load(args) -> fio.DatasetBundle:
    if args.bundle:
        bundle = fio.read_bundle(args.bundle)
    elif args.qrels or args.run:
        if args.qrels is None and args.proxy is None:
            raise DataError("missing input: --qrels (or pass --proxy to derive judgments from --run)")
        bundle = fio.load_dataset(args.qrels, args.run, args.groups, binary=not args.graded)
    else:
        raise DataError("missing input: pass --bundle or --qrels/--run")
    if args.proxy is not None:
        bundle = fio.DatasetBundle(tuple(with_proxy_judgments(t, args.proxy) for t in bundle.topics),
                                   bundle.provenance)
    return bundle


def _notion(args):
    if args.desired.startswith("file:"):
        return fio.parse_desired(args.desired[len("file:"):])
    return args.desired


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run_evaluate(args) -> int:
    bundle = _load(args)
    rankings = default_rankings(bundle)
    if not rankings:
        raise DataError("no topic has a ranking to evaluate (missing --run?)")
    label = args.label or (_stem(args.run) if args.run else "default")
    rows, _ = evaluate(label, bundle.topics, rankings, _notion(args), args.metrics, args.k, args.mcfg)
    _emit(fio.render_report(rows, args.format), args.out)
    return 0


def _stem(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


def run_rerank(args) -> int:
    bundle = _load(args)
    notion = _notion(args)
    depth = args.depth or max(args.k)
    deterministic = args.epsilon in (0.0, 1.0)
    cfg = RankerConfig(epsilon=args.epsilon, k=depth, seed=args.seed, runs=1 if deterministic else args.runs,
                       relevance_mode="proxy" if args.proxy else "judged")
    rankings = {}
    for topic in sorted(bundle.topics, key=lambda t: str(t.topic_id)):
        if not topic.candidates:
            continue
        rankings[topic.topic_id] = epsilon_greedy_runs(topic, desired_for(topic, notion), cfg, args.mcfg)
    label = f"{args.epsilon:g}-greedy"
    rows, _ = evaluate(label, bundle.topics, rankings, notion, args.metrics, args.k, args.mcfg)
    _emit(fio.render_report(rows, args.format), args.out)
    if args.rankings_out:
        with open(args.rankings_out, "w", encoding="utf-8", newline="\n") as fh:
            for topic_id, runs in rankings.items():
                for r, ranking in enumerate(runs):
                    fio.write_run_lines(fh, topic_id, ranking.items, f"{label}-run{r}")
    return 0


def run_ideal(args) -> int:
    bundle = _load(args)
    depth = args.depth or max(args.k)
    rankings = {t.topic_id: greedy_ideal_ranker(t, depth, args.alpha)
                for t in sorted(bundle.topics, key=lambda t: str(t.topic_id)) if t.candidates}
    buf = io.StringIO()
    for topic_id, ranking in rankings.items():
        fio.write_run_lines(buf, topic_id, ranking.items, "greedy-ideal")
    _emit(buf.getvalue(), args.out)
    if args.report:
        rows, _ = evaluate("greedy-ideal", bundle.topics, rankings, _notion(args), args.metrics, args.k, args.mcfg)
        _emit(fio.render_report(rows, args.format), args.report)
    return 0


CORRELATION_COLUMNS = ("pair", "k", "n", "pearson", "pearson_p", "pearson_sig",
                       "spearman", "spearman_p", "spearman_sig", "spearman_p_approx")


def run_correlate(args) -> int:
    bundle = _load(args)
    rankings = default_rankings(bundle)
    if not rankings:
        raise DataError("no topic has a ranking to evaluate (missing --run?)")
    needed = list(dict.fromkeys([args.base] + args.against))
    _, series = evaluate("corr", bundle.topics, rankings, _notion(args), needed, args.k, args.mcfg)
    out = ["\t".join(CORRELATION_COLUMNS)]
    for other in args.against:
        for k in args.k:
            x, y = series[args.base].at(k), series[other].at(k)
            try:
                pr = pearson(x, y)
                sr = spearman(x, y)
            except ValueError as exc:
                raise DataError(f"{args.base} vs {other} at k={k}: {exc}") from None
            out.append("\t".join([
                f"{args.base}-{other}", str(k), str(pr.n),
                fio.format_real(pr.coefficient), fio.format_real(pr.p_value), pr.stars or "-",
                fio.format_real(sr.coefficient), fio.format_real(sr.p_value), sr.stars or "-",
                "yes" if sr.approximate else "no",
            ]))
    _emit("\n".join(out) + "\n", args.out)
    return 0


def run_synth(args) -> int:
    spec = fio.SynthSpec(topics=args.topics, pool=args.pool, groups=args.groups, prior=args.prior,
                         beta=args.beta, aspects_per_group=args.aspects_per_group, seed=args.seed,
                         base=args.base, jitter=args.jitter)
    bundle = fio.generate_synthetic(spec)
    fio.write_bundle(bundle, args.out)
    if args.trec_dir:
        fio.write_trec(bundle, args.trec_dir)
    return 0


COMMANDS = {
    "evaluate": run_evaluate,
    "rerank": run_rerank,
    "ideal": run_ideal,
    "correlate": run_correlate,
    "synth": run_synth,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    _validate(parser, args)
    try:
        return COMMANDS[args.command](args)
    except (DataError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"fairir {args.command}: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
