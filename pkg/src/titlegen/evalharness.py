"""End-to-end evaluation orchestration: pipeline runs over a test split,
ablation grids, candidate-count sweeps, and report emission.

Reports are byte-deterministic for a fixed config digest and seed; per-stage
wall-clock timings are kept on the in-memory rows but excluded from emitted
bytes.
"""
from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from . import corpus, metrics, ranker
from .generator import GenerationRequest, HttpGenerator, MockGenerator, SAMPLE_DEFAULT, TitleGenerator

ENDPOINT_ENV_VAR = "TITLEGEN_ENDPOINT"

LANGUAGE_LABELS = {
    "java": "Java",
    "csharp": "C#",
    "python": "Python",
    "javascript": "JavaScript",
}


@dataclass(frozen=True)
class BackendSpec:
    kind: str = "mock"  # mock | http
    seed: int = 0
    endpoint: str | None = None
    inject_gold_at: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("mock", "http"):
            raise ValueError(f"backend kind must be mock or http, got {self.kind!r}")


@dataclass(frozen=True)
class PipelineConfig:
    splits: dict[str, str] = field(default_factory=dict)
    prefixes: dict[str, str] = field(default_factory=lambda: dict(corpus.DEFAULT_PREFIXES))
    budget: int = 512
    k_self_improve: int = 20
    k_rank: int = 30
    damping: float = 0.23
    tol: float = 1e-6
    max_iter: int = 200
    metric: str = "f1"
    backends: dict[str, BackendSpec] = field(default_factory=lambda: {"baseline": BackendSpec()})
    self_improve: bool = False
    post_rank: bool = True
    parallelism: int = 4
    checkpoint_every: int = 500
    max_new_tokens: int = 48

    def __post_init__(self) -> None:
        if self.budget < 1:
            raise ValueError(f"budget must be >= 1, got {self.budget}")
        if self.k_rank < 1 or self.k_self_improve < 1:
            raise ValueError("candidate counts must be >= 1")
        if not 0.0 < self.damping < 1.0:
            raise ValueError(f"damping must lie in (0, 1), got {self.damping}")
        if "baseline" not in self.backends:
            raise ValueError("config must define a baseline backend")

    def digest(self) -> str:
        canonical = json.dumps(_config_to_dict(self), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _config_to_dict(config: PipelineConfig) -> dict:
    return {
        "splits": dict(sorted(config.splits.items())),
        "prefixes": dict(sorted(config.prefixes.items())),
        "budget": config.budget,
        "k_self_improve": config.k_self_improve,
        "k_rank": config.k_rank,
        "damping": config.damping,
        "tol": config.tol,
        "max_iter": config.max_iter,
        "metric": config.metric,
        "backends": {
            name: {
                "kind": spec.kind,
                "seed": spec.seed,
                "endpoint": spec.endpoint,
                "inject_gold_at": spec.inject_gold_at,
            }
            for name, spec in sorted(config.backends.items())
        },
        "self_improve": config.self_improve,
        "post_rank": config.post_rank,
        "max_new_tokens": config.max_new_tokens,
    }


_CONFIG_SCALARS = {
    "budget": int,
    "k_self_improve": int,
    "k_rank": int,
    "damping": float,
    "tol": float,
    "max_iter": int,
    "metric": str,
    "self_improve": bool,
    "post_rank": bool,
    "parallelism": int,
    "checkpoint_every": int,
    "max_new_tokens": int,
}


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_config_lines(lines: Iterable[str], overrides: dict[str, str] | None = None) -> PipelineConfig:
    """Parse ``key = value`` lines (dotted keys for nested settings).

    Recognized keys: scalar settings above, ``splits.<name>``,
    ``prefixes.<language>``, and ``backends.<profile>.<field>``. ``#`` starts
    a comment. ``overrides`` entries win over file entries; the environment
    variable TITLEGEN_ENDPOINT supplies a default endpoint for http backends.
    """
    entries: dict[str, object] = {}
    for line_number, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {line_number}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        entries[key] = _parse_value(raw)
    for key, raw in (overrides or {}).items():
        entries[key] = _parse_value(raw) if isinstance(raw, str) else raw

    splits: dict[str, str] = {}
    prefixes = dict(corpus.DEFAULT_PREFIXES)
    backend_fields: dict[str, dict] = {}
    scalars: dict[str, object] = {}
    for key, value in entries.items():
        if key.startswith("splits."):
            splits[key.split(".", 1)[1]] = str(value)
        elif key.startswith("prefixes."):
            prefixes[key.split(".", 1)[1]] = str(value)
        elif key.startswith("backends."):
            _, profile, fieldname = key.split(".", 2)
            backend_fields.setdefault(profile, {})[fieldname] = value
        elif key in _CONFIG_SCALARS:
            scalars[key] = _CONFIG_SCALARS[key](value)
        else:
            raise ValueError(f"unknown config key {key!r}")

    env_endpoint = os.environ.get(ENDPOINT_ENV_VAR)
    backends: dict[str, BackendSpec] = {}
    for profile, fields in backend_fields.items():
        endpoint = fields.get("endpoint", env_endpoint if fields.get("kind") == "http" else None)
        backends[profile] = BackendSpec(
            kind=str(fields.get("kind", "mock")),
            seed=int(fields.get("seed", 0)),
            endpoint=str(endpoint) if endpoint is not None else None,
            inject_gold_at=int(fields["inject_gold_at"]) if "inject_gold_at" in fields else None,
        )
    if not backends:
        backends = {"baseline": BackendSpec()}

    return PipelineConfig(splits=splits, prefixes=prefixes, backends=backends, **scalars)


def load_config(path: str, overrides: dict[str, str] | None = None) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_config_lines(handle, overrides=overrides)


def make_backend(spec: BackendSpec, gold_by_input: dict[str, str] | None = None) -> TitleGenerator:
    if spec.kind == "mock":
        return MockGenerator(seed=spec.seed, inject_gold_at=spec.inject_gold_at, gold_lookup=gold_by_input)
    if spec.endpoint is None:
        raise ValueError(f"http backend has no endpoint (set it or export {ENDPOINT_ENV_VAR})")
    return HttpGenerator(spec.endpoint)


def _select_backend(config: PipelineConfig, self_improve: bool) -> BackendSpec:
    # Self-improvement is a backend-profile switch: training happens outside
    # this component, so the self-improved model is just a different backend.
    if self_improve and "self_improved" in config.backends:
        return config.backends["self_improved"]
    return config.backends["baseline"]


@dataclass(frozen=True)
class ScoredPost:
    id: str
    language: str
    title: str
    scores: metrics.PairScores


@dataclass(frozen=True)
class ReportRow:
    label: str
    report: metrics.CorpusReport
    timings: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class RunReport:
    config_digest: str
    rows: tuple[ReportRow, ...]


def _load_checkpoint(path: str) -> dict[str, ScoredPost]:
    done: dict[str, ScoredPost] = {}
    if not os.path.exists(path):
        return done
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            obj = json.loads(line)
            done[obj["id"]] = ScoredPost(
                id=obj["id"],
                language=obj["language"],
                title=obj["title"],
                scores=metrics.PairScores(
                    rouge1=metrics.RougeScore(**obj["rouge1"]),
                    rouge2=metrics.RougeScore(**obj["rouge2"]),
                    rouge_l=metrics.RougeScore(**obj["rouge_l"]),
                ),
            )
    return done


def _append_checkpoint(path: str, scored: Sequence[ScoredPost]) -> None:
    with open(path, "a", encoding="utf-8") as handle:
        for post in scored:
            handle.write(
                json.dumps(
                    {
                        "id": post.id,
                        "language": post.language,
                        "title": post.title,
                        "rouge1": vars(post.scores.rouge1),
                        "rouge2": vars(post.scores.rouge2),
                        "rouge_l": vars(post.scores.rouge_l),
                    },
                    ensure_ascii=False,
                    sort_keys=True,
                )
                + "\n"
            )


def evaluate_split(
    split: corpus.DatasetSplit,
    backend: TitleGenerator,
    config: PipelineConfig,
    k: int | None = None,
    post_rank: bool | None = None,
    checkpoint_path: str | None = None,
) -> tuple[metrics.CorpusReport, list[ScoredPost], dict[str, float]]:
    """Format, generate, rank, and score every post of a split.

    With ``post_rank`` off a single candidate is requested and taken as-is.
    Completed posts are appended to the checkpoint file in input order every
    ``config.checkpoint_every`` posts; posts already present there are never
    re-generated or double-counted.
    """
    post_rank = config.post_rank if post_rank is None else post_rank
    k = (config.k_rank if post_rank else 1) if k is None else k
    timings = {"generate": 0.0, "rank": 0.0, "score": 0.0}
    done = _load_checkpoint(checkpoint_path) if checkpoint_path else {}
    pending = [post for post in split.records if post.id not in done]

    def run_post(post: corpus.Post) -> ScoredPost:
        formatted = corpus.format_input(post, config.prefixes, config.budget)
        request = GenerationRequest(
            input=formatted.text,
            num_candidates=k if post_rank else 1,
            max_new_tokens=config.max_new_tokens,
            strategy=SAMPLE_DEFAULT,
        )
        start = time.perf_counter()
        response = backend.generate(request)
        timings["generate"] += time.perf_counter() - start
        if post_rank:
            start = time.perf_counter()
            title, _ = ranker.select_best(
                response.candidates, damping=config.damping, tol=config.tol, max_iter=config.max_iter
            )
            timings["rank"] += time.perf_counter() - start
        else:
            title = response.candidates[0]
        start = time.perf_counter()
        scores = metrics.score_pair(post.title, title)
        timings["score"] += time.perf_counter() - start
        return ScoredPost(id=post.id, language=post.language, title=title, scores=scores)

    batch = max(1, config.checkpoint_every)
    for offset in range(0, len(pending), batch):
        chunk = pending[offset : offset + batch]
        if config.parallelism > 1:
            with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
                scored_chunk = list(pool.map(run_post, chunk))
        else:
            scored_chunk = [run_post(post) for post in chunk]
        if checkpoint_path:
            _append_checkpoint(checkpoint_path, scored_chunk)
        for scored in scored_chunk:
            done[scored.id] = scored

    ordered = [done[post.id] for post in split.records]
    by_language: dict[str, list[metrics.PairScores]] = {}
    for post, scored in zip(split.records, ordered):
        by_language.setdefault(post.language, []).append(scored.scores)
    return metrics.aggregate(by_language), ordered, timings


def _gold_lookup_for(split: corpus.DatasetSplit, config: PipelineConfig) -> dict[str, str]:
    return {
        corpus.format_input(post, config.prefixes, config.budget).text: post.title
        for post in split.records
    }


def run_evaluate(
    config: PipelineConfig,
    split: corpus.DatasetSplit,
    k_values: Sequence[int] | None = None,
    checkpoint_path: str | None = None,
) -> RunReport:
    """One report row per candidate count K (the sweep's single entry by default)."""
    k_values = [config.k_rank] if k_values is None else list(k_values)
    spec = _select_backend(config, config.self_improve)
    gold = _gold_lookup_for(split, config)
    rows = []
    for k in k_values:
        backend = make_backend(spec, gold)
        wall = time.perf_counter()
        row_checkpoint = f"{checkpoint_path}.k{k}" if checkpoint_path else None
        report, _, timings = evaluate_split(
            split, backend, config, k=k, post_rank=config.post_rank, checkpoint_path=row_checkpoint
        )
        timings["total"] = time.perf_counter() - wall
        rows.append(ReportRow(label=f"k={k}" if config.post_rank else f"k={k} (no ranking)", report=report, timings=timings))
    return RunReport(config_digest=config.digest(), rows=tuple(rows))


ABLATION_GRID = (
    ("base", False, False),
    ("with self-improvement", True, False),
    ("with post-ranking", False, True),
    ("full", True, True),
)


def run_ablation(config: PipelineConfig, split: corpus.DatasetSplit) -> RunReport:
    """Evaluate all four {self-improvement, post-ranking} on/off variants."""
    gold = _gold_lookup_for(split, config)
    rows = []
    for label, self_improve, post_rank in ABLATION_GRID:
        backend = make_backend(_select_backend(config, self_improve), gold)
        wall = time.perf_counter()
        report, _, timings = evaluate_split(split, backend, config, post_rank=post_rank)
        timings["total"] = time.perf_counter() - wall
        rows.append(ReportRow(label=label, report=report, timings=timings))
    return RunReport(config_digest=config.digest(), rows=tuple(rows))


def _percent(value: float) -> str:
    return f"{100.0 * value:.2f}"


def report_from_language_means(label: str, means: dict[str, dict[str, float]]) -> metrics.CorpusReport:
    """Build a corpus report directly from per-language mean F1 fractions.

    ``means`` maps language tag to {"rouge1", "rouge2", "rouge_l"}; recall
    means default to the F1 values (callers feeding externally reported
    numbers usually only have F1).
    """
    scores_by_language = {
        language: [
            metrics.PairScores(
                rouge1=metrics.RougeScore(m["rouge1"], m["rouge1"], m["rouge1"]),
                rouge2=metrics.RougeScore(m["rouge2"], m["rouge2"], m["rouge2"]),
                rouge_l=metrics.RougeScore(m["rouge_l"], m["rouge_l"], m["rouge_l"]),
            )
        ]
        for language, m in means.items()
    }
    return metrics.aggregate(scores_by_language)


def render_table(report: RunReport, value: str = "f1") -> str:
    """Fixed-width table: R-1/R-2/R-L per language plus the macro average."""
    if value not in ("f1", "recall"):
        raise ValueError(f"value must be f1 or recall, got {value!r}")
    groups = [*LANGUAGE_LABELS.values(), "Average"]
    label_width = max([len("Model")] + [len(row.label) for row in report.rows])
    cell = 7
    group_width = 3 * cell + 2

    def group_cells(means: metrics.LanguageMeans | None) -> str:
        if means is None:
            return " ".join("-".rjust(cell) for _ in range(3)) + " "
        triple = (means.rouge1, means.rouge2, means.rouge_l)
        return " ".join(_percent(getattr(m, value)).rjust(cell) for m in triple) + " "

    lines = [f"# config {report.config_digest} ({value.upper()} %)"]
    header1 = "Model".ljust(label_width) + " | " + " | ".join(g.center(group_width - 1) for g in groups)
    subheader = "".ljust(label_width) + " | " + " | ".join(
        " ".join(h.rjust(cell) for h in ("R-1", "R-2", "R-L")) for _ in groups
    )
    lines.append(header1)
    lines.append(subheader)
    lines.append("-" * len(subheader))
    for row in report.rows:
        cells = []
        for language in LANGUAGE_LABELS:
            cells.append(group_cells(row.report.per_language.get(language)))
        cells.append(group_cells(row.report.average))
        lines.append(row.label.ljust(label_width) + " | " + "| ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def _means_to_dict(means: metrics.LanguageMeans) -> dict:
    return {
        "rouge1": {"f1": means.rouge1.f1, "recall": means.rouge1.recall},
        "rouge2": {"f1": means.rouge2.f1, "recall": means.rouge2.recall},
        "rouge_l": {"f1": means.rouge_l.f1, "recall": means.rouge_l.recall},
    }


def render_machine(report: RunReport) -> str:
    """Line-delimited JSON dump, one row per configuration."""
    lines = []
    for row in report.rows:
        lines.append(
            json.dumps(
                {
                    "config_digest": report.config_digest,
                    "label": row.label,
                    "per_language": {
                        language: _means_to_dict(means) for language, means in sorted(row.report.per_language.items())
                    },
                    "average": _means_to_dict(row.report.average),
                },
                ensure_ascii=False,
                sort_keys=True,
            )
        )
    return "\n".join(lines) + "\n"


def parse_machine(text: str) -> RunReport:
    rows = []
    digest = ""
    for line in text.splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        digest = obj["config_digest"]

        def to_means(d: dict) -> metrics.LanguageMeans:
            return metrics.LanguageMeans(
                rouge1=metrics.MeanScore(**d["rouge1"]),
                rouge2=metrics.MeanScore(**d["rouge2"]),
                rouge_l=metrics.MeanScore(**d["rouge_l"]),
            )

        rows.append(
            ReportRow(
                label=obj["label"],
                report=metrics.CorpusReport(
                    per_language={lang: to_means(d) for lang, d in obj["per_language"].items()},
                    average=to_means(obj["average"]),
                ),
            )
        )
    return RunReport(config_digest=digest, rows=tuple(rows))


def emit_report(report: RunReport, fmt: str, path: str | None = None, value: str = "f1") -> str:
    """Render a run report as ``table`` or ``machine`` text, optionally to a file."""
    if fmt == "table":
        rendered = render_table(report, value=value)
    elif fmt == "machine":
        rendered = render_machine(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    if path is not None:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(rendered)
    return rendered
