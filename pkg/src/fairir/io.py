"""Reading and writing datasets and reports.

Plain-text inputs follow TREC conventions; fields are split on runs of spaces
or tabs, blank lines and ``#`` comments are skipped:

* qrels: ``topic subtopic docid judgment``
* run: ``topic Q0 docid rank score tag``
* groups: ``docid group`` (repeat a docid to give it several groups)
* desired distribution: ``group probability``

A :class:`DatasetBundle` can also be stored losslessly as JSON with
:func:`write_bundle` / :func:`read_bundle`.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import IO, Iterable, Optional, Union

import numpy as np

from .core import FILE_SUM_TOLERANCE, OTHER_GROUP, Document, Judgments, Topic

logger = logging.getLogger(__name__)

PathLike = Union[str, os.PathLike]

BUNDLE_FORMAT = "fairir-bundle"
BUNDLE_VERSION = 1


class ParseError(ValueError):
    """A malformed input line; ``line`` is 1-based."""

    def __init__(self, source: str, line: int, message: str):
        super().__init__(f"{source}:{line}: {message}")
        self.source = source
        self.line = line


def _records(data: Union[PathLike, bytes, str, Iterable], source: Optional[str] = None):
    """Yield ``(source, line_number, fields)`` for non-blank, non-comment lines.

    ``data`` is a path, raw bytes, or an iterable of lines (str or bytes).
    """
    if isinstance(data, (str, os.PathLike)):
        source = source or os.fspath(data)
        with open(data, "rb") as fh:
            raw_lines = fh.read().split(b"\n")
    elif isinstance(data, bytes):
        raw_lines = data.split(b"\n")
    else:
        raw_lines = list(data)
    source = source or "<input>"
    for n, raw in enumerate(raw_lines, start=1):
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise ParseError(source, n, f"invalid UTF-8 ({exc.reason})") from None
        text = raw.strip()
        if not text or text.startswith("#"):
            continue
        yield source, n, text.split()


def _number(source, n, text, what, integer=False):
    try:
        value = int(text) if integer else float(text)
    except ValueError:
        raise ParseError(source, n, f"{what} {text!r} is not a{'n integer' if integer else ' number'}") from None
    if not integer and not math.isfinite(value):
        raise ParseError(source, n, f"{what} must be finite, got {text!r}")
    return value


@dataclass
class QrelsData:
    """Per-topic aspect sets and grade tables parsed from a qrels file."""

    aspects: dict = field(default_factory=dict)
    grades: dict = field(default_factory=dict)
    binary: bool = True
    warnings: list = field(default_factory=list)

    def judgments(self, topic_id) -> Judgments:
        return Judgments(self.grades.get(topic_id, {}), binary=self.binary)

    def docs(self, topic_id) -> list:
        seen = {}
        for doc_id, _ in self.grades.get(topic_id, {}):
            seen.setdefault(doc_id, None)
        return list(seen)


def parse_qrels_diversity(data, binary: bool = True, source: Optional[str] = None) -> QrelsData:
    """Parse diversity qrels ``topic subtopic docid judgment``.

    Negative judgments become 0. In binary mode grades >= 1 become 1 and
    everything else 0. A repeated ``(topic, subtopic, doc)`` keeps the last
    grade and records a warning.
    """
    out = QrelsData(binary=binary)
    for src, n, fields in _records(data, source):
        if len(fields) != 4:
            raise ParseError(src, n, f"expected 4 fields 'topic subtopic docid judgment', got {len(fields)}")
        topic_id, aspect, doc_id, grade_text = fields
        grade = max(_number(src, n, grade_text, "judgment"), 0.0)
        if binary:
            grade = 1.0 if grade >= 1 else 0.0
        table = out.grades.setdefault(topic_id, {})
        out.aspects.setdefault(topic_id, set()).add(aspect)
        if (doc_id, aspect) in table:
            out.warnings.append(f"{src}:{n}: duplicate judgment for ({topic_id}, {aspect}, {doc_id}); last one wins")
        table[(doc_id, aspect)] = grade
    return out


@dataclass
class RunData:
    rankings: dict = field(default_factory=dict)
    scores: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)


def parse_run(data, source: Optional[str] = None) -> RunData:
    """Parse a TREC run ``topic Q0 docid rank score tag`` into ordered rankings.

    Lists are sorted by the rank column. When ranks within a topic are not
    exactly 1..n the topic is re-ranked by descending score, with a warning.
    A doc listed twice for the same topic is an error.
    """
    rows = {}
    for src, n, fields in _records(data, source):
        if len(fields) != 6:
            raise ParseError(src, n, f"expected 6 fields 'topic Q0 docid rank score tag', got {len(fields)}")
        topic_id, _, doc_id, rank_text, score_text, _ = fields
        rank = _number(src, n, rank_text, "rank", integer=True)
        score = _number(src, n, score_text, "score")
        topic_rows = rows.setdefault(topic_id, {})
        if doc_id in topic_rows:
            raise ParseError(src, n, f"doc {doc_id!r} listed twice for topic {topic_id!r}")
        topic_rows[doc_id] = (rank, score, n)
    out = RunData()
    for topic_id, topic_rows in rows.items():
        items = sorted(topic_rows.items(), key=lambda kv: (kv[1][0], kv[1][2]))
        ranks = [r for _, (r, _, _) in items]
        if ranks != list(range(1, len(items) + 1)):
            out.warnings.append(f"topic {topic_id}: ranks are not contiguous from 1; re-ranked by score")
            items = sorted(topic_rows.items(), key=lambda kv: (-kv[1][1], kv[1][0], kv[0]))
        out.rankings[topic_id] = [doc for doc, _ in items]
        out.scores[topic_id] = {doc: s for doc, (_, s, _) in items}
    return out


def parse_groups(data, source: Optional[str] = None) -> dict:
    """Parse ``docid group`` lines into ``docid -> set of groups``."""
    out = {}
    for src, n, fields in _records(data, source):
        if len(fields) != 2:
            raise ParseError(src, n, f"expected 2 fields 'docid group', got {len(fields)}")
        out.setdefault(fields[0], set()).add(fields[1])
    return out


def parse_desired(data, source: Optional[str] = None) -> dict:
    """Parse ``group probability`` lines; the probabilities must sum to 1 +/- 1e-6."""
    out = {}
    last = 0
    src = source or "<input>"
    for src, n, fields in _records(data, source):
        last = n
        if len(fields) != 2:
            raise ParseError(src, n, f"expected 2 fields 'group probability', got {len(fields)}")
        p = _number(src, n, fields[1], "probability")
        if p < 0:
            raise ParseError(src, n, f"probability must be >= 0, got {p}")
        if fields[0] in out:
            raise ParseError(src, n, f"group {fields[0]!r} listed twice")
        out[fields[0]] = p
    if not out:
        raise ParseError(src, 1, "no 'group probability' lines")
    total = math.fsum(out.values())
    if abs(total - 1.0) > FILE_SUM_TOLERANCE:
        raise ParseError(src, last, f"probabilities sum to {total!r}, expected 1 (+/- 1e-6)")
    return out


@dataclass(frozen=True)
class DatasetBundle:
    topics: tuple
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "topics", tuple(self.topics))
        ids = [t.topic_id for t in self.topics]
        if len(ids) != len(set(ids)):
            raise ValueError("topic ids in a bundle must be unique")

    def topic(self, topic_id) -> Topic:
        for t in self.topics:
            if t.topic_id == topic_id:
                return t
        raise KeyError(topic_id)

    @property
    def warnings(self) -> list:
        return list(self.provenance.get("warnings", []))


def load_dataset(qrels: Optional[PathLike] = None, run: Optional[PathLike] = None,
                 groups: Optional[PathLike] = None, binary: bool = True) -> DatasetBundle:
    """Join qrels, run and group files into topics.

    Each topic's candidates are the run's documents followed by any other
    judged documents. Without a groups file a document's groups are the
    subtopics it is relevant to. Topics without qrels get a single placeholder
    aspect and empty judgments; use proxy judgments to rank or evaluate them.
    """
    if qrels is None and run is None:
        raise ValueError("need at least a qrels or a run file")
    warnings = []
    q = parse_qrels_diversity(qrels, binary=binary) if qrels is not None else None
    r = parse_run(run) if run is not None else None
    g = parse_groups(groups) if groups is not None else None
    if q is not None:
        warnings += q.warnings
    if r is not None:
        warnings += r.warnings

    topic_ids = set()
    if q is not None:
        topic_ids |= set(q.aspects)
    if r is not None:
        topic_ids |= set(r.rankings)

    topics = []
    used_docs = set()
    for topic_id in sorted(topic_ids):
        ranking = r.rankings.get(topic_id, []) if r is not None else []
        judgments = q.judgments(topic_id) if q is not None else Judgments(binary=binary)
        doc_ids = list(ranking)
        if q is not None:
            judged = q.docs(topic_id)
            seen = set(doc_ids)
            doc_ids += [d for d in judged if d not in seen]
            if ranking:
                judged_set = set(judged)
                unjudged = sum(1 for d in ranking if d not in judged_set)
                if unjudged:
                    warnings.append(f"topic {topic_id}: {unjudged} run docs have no judgments (read as 0)")
        if q is not None and topic_id in q.aspects:
            aspects = set(q.aspects[topic_id])
        else:
            aspects = {OTHER_GROUP}
        rank_of = {d: i for i, d in enumerate(ranking, start=1)}
        docs = []
        for doc_id in doc_ids:
            if g is not None:
                doc_groups = g.get(doc_id, set())
            else:
                doc_groups = set(judgments.aspects_of(doc_id))
            docs.append(Document(doc_id, frozenset(doc_groups), rank_of.get(doc_id)))
            used_docs.add(doc_id)
        topics.append(Topic(topic_id, frozenset(aspects), tuple(docs), judgments, tuple(ranking)))

    if g is not None:
        stray = sorted(set(g) - used_docs)
        if stray:
            warnings.append(f"{len(stray)} docs in the groups file are not candidates of any topic")
    provenance = {
        "sources": {k: os.fspath(v) for k, v in (("qrels", qrels), ("run", run), ("groups", groups)) if v is not None},
        "format": "trec",
        "warnings": warnings,
    }
    for w in warnings:
        logger.warning(w)
    return DatasetBundle(tuple(topics), provenance)


def _topic_to_json(topic: Topic) -> dict:
    return {
        "topic_id": topic.topic_id,
        "aspects": sorted(topic.aspects, key=str),
        "candidates": [
            {"doc_id": d.doc_id, "groups": sorted(d.groups, key=str), "default_rank": d.default_rank}
            for d in topic.candidates
        ],
        "binary": topic.judgments.binary,
        "judgments": [[d, a, g] for (d, a), g in sorted(topic.judgments.table.items(), key=lambda kv: (str(kv[0][0]), str(kv[0][1])))],
        "default_ranking": list(topic.default_ranking),
    }


def _topic_from_json(obj: dict) -> Topic:
    return Topic(
        topic_id=obj["topic_id"],
        aspects=frozenset(obj["aspects"]),
        candidates=tuple(Document(c["doc_id"], frozenset(c["groups"]), c["default_rank"]) for c in obj["candidates"]),
        judgments=Judgments({(d, a): g for d, a, g in obj["judgments"]}, binary=obj["binary"]),
        default_ranking=tuple(obj["default_ranking"]),
    )


def dumps_bundle(bundle: DatasetBundle) -> str:
    doc = {
        "format": BUNDLE_FORMAT,
        "version": BUNDLE_VERSION,
        "provenance": bundle.provenance,
        "topics": [_topic_to_json(t) for t in bundle.topics],
    }
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def loads_bundle(text: str) -> DatasetBundle:
    doc = json.loads(text)
    if doc.get("format") != BUNDLE_FORMAT:
        raise ValueError(f"not a {BUNDLE_FORMAT} document")
    if doc.get("version") != BUNDLE_VERSION:
        raise ValueError(f"unsupported bundle version {doc.get('version')!r}")
    return DatasetBundle(tuple(_topic_from_json(t) for t in doc["topics"]), doc.get("provenance", {}))


def write_bundle(bundle: DatasetBundle, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_bundle(bundle))


def read_bundle(path: PathLike) -> DatasetBundle:
    with open(path, encoding="utf-8") as fh:
        return loads_bundle(fh.read())


def write_trec(bundle: DatasetBundle, directory: PathLike, tag: str = "default") -> dict:
    """Write ``qrels.txt``, ``run.txt`` and ``groups.txt`` for ``bundle``; return their paths.

    The qrels list every candidate against every aspect of its topic, so
    reading the files back keeps the pool and the aspect sets.
    """
    os.makedirs(directory, exist_ok=True)
    paths = {name: os.path.join(directory, f"{name}.txt") for name in ("qrels", "run", "groups")}
    with open(paths["qrels"], "w", encoding="utf-8", newline="\n") as fh:
        # every candidate against every subtopic, zeros included, as in diversity qrels
        for t in bundle.topics:
            for a in sorted(t.aspects, key=str):
                for d in t.candidates:
                    fh.write(f"{t.topic_id} {a} {d.doc_id} {t.judgments.grade(d.doc_id, a):g}\n")
    with open(paths["run"], "w", encoding="utf-8", newline="\n") as fh:
        for t in bundle.topics:
            write_run_lines(fh, t.topic_id, t.default_ranking, tag)
    with open(paths["groups"], "w", encoding="utf-8", newline="\n") as fh:
        seen = set()
        for t in bundle.topics:
            for d in t.candidates:
                for grp in sorted(d.groups, key=str):
                    if (d.doc_id, grp) not in seen:
                        seen.add((d.doc_id, grp))
                        fh.write(f"{d.doc_id} {grp}\n")
    return paths


def write_run_lines(fh: IO, topic_id, items, tag: str) -> None:
    n = len(items)
    for rank, doc_id in enumerate(items, start=1):
        fh.write(f"{topic_id} Q0 {doc_id} {rank} {n - rank + 1} {tag}\n")


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the synthetic benchmark.

    Each document draws one group from ``prior`` and one aspect inside that
    group. It is relevant with probability ``(1 - beta) * base + beta`` when it
    belongs to the majority group (largest prior) and ``(1 - beta) * base``
    otherwise. The default ranking sorts by relevance plus Gaussian noise of
    scale ``jitter``.
    """

    topics: int = 100
    pool: int = 100
    groups: int = 2
    prior: Optional[tuple] = None
    beta: float = 0.0
    aspects_per_group: int = 2
    seed: int = 0
    base: float = 0.5
    jitter: float = 0.5

    def __post_init__(self):
        if self.topics < 1 or self.pool < 1 or self.groups < 1 or self.aspects_per_group < 1:
            raise ValueError("topics, pool, groups and aspects_per_group must all be >= 1")
        prior = self.prior if self.prior is not None else (1.0 / self.groups,) * self.groups
        prior = tuple(float(p) for p in prior)
        if len(prior) != self.groups:
            raise ValueError(f"prior has {len(prior)} entries for {self.groups} groups")
        if any(p < 0 for p in prior) or abs(math.fsum(prior) - 1.0) > FILE_SUM_TOLERANCE:
            raise ValueError(f"prior must be non-negative and sum to 1, got {prior}")
        object.__setattr__(self, "prior", prior)
        if not 0 <= self.beta <= 1:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if not 0 <= self.base <= 1:
            raise ValueError(f"base must lie in [0, 1], got {self.base}")
        if self.jitter < 0:
            raise ValueError("jitter must be >= 0")


def generate_synthetic(spec: SynthSpec) -> DatasetBundle:
    """Seeded synthetic topics with group-correlated binary relevance."""
    rng = np.random.default_rng(spec.seed)
    prior = np.asarray(spec.prior)
    prior = prior / prior.sum()
    majority = int(np.argmax(prior))
    width = len(str(spec.topics))
    dwidth = len(str(spec.pool - 1))
    group_names = [f"g{i}" for i in range(spec.groups)]
    aspects = [f"{g}.a{j}" for g in group_names for j in range(spec.aspects_per_group)]
    topics = []
    for t in range(spec.topics):
        topic_id = f"t{t + 1:0{width}d}"
        group_idx = rng.choice(spec.groups, size=spec.pool, p=prior)
        aspect_idx = rng.integers(spec.aspects_per_group, size=spec.pool)
        p_rel = (1 - spec.beta) * spec.base + spec.beta * (group_idx == majority)
        relevant = rng.random(spec.pool) < p_rel
        score = relevant + spec.jitter * rng.standard_normal(spec.pool)
        order = np.argsort(-score, kind="stable")
        rank_of = np.empty(spec.pool, dtype=int)
        rank_of[order] = np.arange(1, spec.pool + 1)
        doc_ids = [f"{topic_id}-d{j:0{dwidth}d}" for j in range(spec.pool)]
        docs = tuple(
            Document(doc_ids[j], frozenset((group_names[group_idx[j]],)), int(rank_of[j]))
            for j in range(spec.pool)
        )
        table = {
            (doc_ids[j], f"{group_names[group_idx[j]]}.a{aspect_idx[j]}"): 1.0
            for j in range(spec.pool) if relevant[j]
        }
        topics.append(Topic(topic_id, frozenset(aspects), docs, Judgments(table, binary=True),
                            tuple(doc_ids[j] for j in order)))
    provenance = {"format": "synthetic", "spec": {k: (list(v) if isinstance(v, tuple) else v)
                                                 for k, v in spec.__dict__.items()}, "warnings": []}
    return DatasetBundle(tuple(topics), provenance)


REPORT_COLUMNS = ("algorithm", "metric", "k", "mean", "min", "max", "excluded", "flags")
REPORT_FORMATS = ("tsv", "json")


def format_real(x: float) -> str:
    """Fixed 6-decimal rendering; non-finite values as ``inf``, ``-inf``, ``nan``."""
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    out = f"{x:.6f}"
    return "0.000000" if out == "-0.000000" else out


@dataclass(frozen=True)
class ReportRow:
    algorithm: str
    metric: str
    k: int
    mean: float
    min: float
    max: float
    excluded: int = 0
    flags: tuple = ()

    def cells(self) -> list:
        return [self.algorithm, self.metric, str(self.k), format_real(self.mean), format_real(self.min),
                format_real(self.max), str(self.excluded), ",".join(self.flags) or "-"]


def render_report(rows: Iterable[ReportRow], fmt: str = "tsv") -> str:
    """Render report rows.

    ``tsv`` has the header ``algorithm metric k mean min max excluded flags``
    (tab-separated). ``json`` is a list of objects with the same keys and the
    reals as 6-decimal strings.
    """
    rows = list(rows)
    if fmt == "tsv":
        lines = ["\t".join(REPORT_COLUMNS)] + ["\t".join(r.cells()) for r in rows]
        return "\n".join(lines) + "\n"
    if fmt == "json":
        objs = [dict(zip(REPORT_COLUMNS, r.cells())) for r in rows]
        for o in objs:
            o["k"] = int(o["k"])
            o["excluded"] = int(o["excluded"])
        return json.dumps(objs, indent=1) + "\n"
    raise ValueError(f"unknown report format {fmt!r}; choose from {REPORT_FORMATS}")


def write_report(rows: Iterable[ReportRow], out: Union[PathLike, IO, None] = None, fmt: str = "tsv") -> str:
    """Render ``rows`` and write them to a path or stream; returns the text."""
    text = render_report(rows, fmt)
    if out is None:
        return text
    if hasattr(out, "write"):
        out.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text
