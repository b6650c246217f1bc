"""Stage implementations behind the CLI: ingest through report.

Each stage reads the artifacts of its parents, writes its own under the
run's output directory, and records a manifest carrying the config hash
plus the hashes of its parent manifests. Manifests therefore form a
provenance chain; the report stage refuses inputs whose chain mixes
different configurations. All artifact bytes are deterministic functions
of the config (stages never persist wall-clock values), so a rerun with
unchanged inputs reproduces the output tree byte for byte.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import corpus as corpus_mod
from . import estimators, evaluation, gateway, retrieval
from .config import ConfigError, DatasetRef, RunConfig
from .corpus import CandidateSolution, DatasetSplit, ProblemSpec, TestSuite
from .estimators import PromptTemplate, QualityScore
from .executor import (
    CorrectnessLabel,
    RunnerRegistry,
    SubprocessRunner,
    label_corpus,
    marker_stub_runner,
)
from .gateway import STUB_PASS_MARKER

STAGES = ("ingest", "generate", "label", "index", "predict", "tune", "evaluate", "report")

DEV_SET = "dev"


class PipelineError(RuntimeError):
    pass


class MissingArtifactError(PipelineError):
    """An upstream stage has not produced its artifacts yet."""

    def __init__(self, stage_needed: str, message: str | None = None):
        self.stage_needed = stage_needed
        super().__init__(
            message or f"missing upstream artifact: run the '{stage_needed}' stage first"
        )


class ProvenanceError(PipelineError):
    """Artifacts on disk were produced under a different configuration."""


# --- layout and manifests ---------------------------------------------------


class Layout:
    def __init__(self, out_dir: Path):
        self.root = Path(out_dir)

    def manifest(self, stage: str) -> Path:
        return self.root / "manifests" / f"{stage}.json"

    @property
    def corpus_dir(self) -> Path:
        return self.root / "corpus"

    @property
    def split_file(self) -> Path:
        return self.corpus_dir / "split.json"

    def generated_file(self, set_name: str) -> Path:
        return self.root / "generated" / f"{set_name}.jsonl"

    def labels_file(self, set_name: str) -> Path:
        return self.root / "labels" / f"{set_name}.jsonl"

    @property
    def index_dir(self) -> Path:
        return self.root / "index"

    def scores_file(self, set_name: str, method: str, k: int | None) -> Path:
        stem = method if k is None else f"{method}.k{k}"
        return self.root / "scores" / set_name / f"{stem}.jsonl"

    @property
    def tuning_dir(self) -> Path:
        return self.root / "tuning"

    @property
    def eval_dir(self) -> Path:
        return self.root / "eval"

    @property
    def report_dir(self) -> Path:
        return self.root / "report"

    def prompt_audit_file(self, set_name: str, method: str, k: int | None,
                          problem_id: str, solution_id: str) -> Path:
        stem = method if k is None else f"{method}.k{k}"
        return self.root / "prompts" / set_name / stem / f"{problem_id}__{solution_id}.txt"


def _sha256_bytes(raw: bytes) -> str:
    return hashlib.sha256(raw).hexdigest()


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _write_jsonl(path: Path, records: Iterable[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _read_jsonl(path: Path) -> list[dict]:
    with path.open("r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_manifest(layout: Layout, stage: str, cfg: RunConfig,
                   parents: dict[str, str], stats: dict) -> str:
    manifest = {
        "stage": stage,
        "config_hash": cfg.config_hash,
        "parents": parents,
        "stats": stats,
    }
    raw = json.dumps(manifest, sort_keys=True, indent=2) + "\n"
    _write_text(layout.manifest(stage), raw)
    return _sha256_bytes(raw.encode("utf-8"))


def load_manifest(layout: Layout, stage: str) -> tuple[dict, str]:
    path = layout.manifest(stage)
    if not path.is_file():
        raise MissingArtifactError(stage)
    raw = path.read_bytes()
    return json.loads(raw), _sha256_bytes(raw)


def require_parents(layout: Layout, cfg: RunConfig, stages: Sequence[str]) -> dict[str, str]:
    """Load parent manifests, enforcing config-hash agreement."""
    parents = {}
    for stage in stages:
        manifest, digest = load_manifest(layout, stage)
        if manifest.get("config_hash") != cfg.config_hash:
            raise ProvenanceError(
                f"stage '{stage}' artifacts were built under a different config; rerun it"
            )
        parents[stage] = digest
    return parents


# --- artifact record codecs ---------------------------------------------------


def _solution_record(s: CandidateSolution) -> dict:
    return {"problem_id": s.problem_id, "solution_id": s.solution_id, "code": s.code,
            "rank_hint": s.rank_hint, "generator_tag": s.generator_tag}


def _solution_from_record(rec: dict) -> CandidateSolution:
    return CandidateSolution(**rec)


def _label_record(label: CorrectnessLabel) -> dict:
    # duration is wall-clock telemetry; persisting it would break
    # byte-identical reruns, so it stays in memory only
    return {"problem_id": label.problem_id, "solution_id": label.solution_id,
            "verdict": label.verdict, "detail": label.detail}


def _label_from_record(rec: dict) -> CorrectnessLabel:
    return CorrectnessLabel(**rec)


def _score_record(s: QualityScore) -> dict:
    return {"problem_id": s.problem_id, "solution_id": s.solution_id, "method": s.method,
            "score": s.score, "k_used": s.k_used, "alpha_used": s.alpha_used,
            "context_example_ids": list(s.context_example_ids)}


def _score_from_record(rec: dict) -> QualityScore:
    rec = dict(rec)
    rec["context_example_ids"] = tuple(rec.get("context_example_ids") or ())
    return QualityScore(**rec)


# --- corpus access helpers ---------------------------------------------------


def _load_train_corpus(layout: Layout) -> corpus_mod.Corpus:
    path = layout.corpus_dir / "train.jsonl"
    if not path.is_file():
        raise MissingArtifactError("ingest")
    return corpus_mod.load_native(path)


def _load_test_corpus(layout: Layout, ref: DatasetRef) -> corpus_mod.Corpus:
    path = layout.corpus_dir / "tests" / f"{ref.name}.jsonl"
    if not path.is_file():
        raise MissingArtifactError("ingest")
    return corpus_mod.load_native(path)


def _load_split(layout: Layout) -> DatasetSplit:
    if not layout.split_file.is_file():
        raise MissingArtifactError("ingest")
    rec = json.loads(layout.split_file.read_text(encoding="utf-8"))
    return DatasetSplit(train=tuple(rec["train"]), dev=tuple(rec["dev"]), seed=rec["seed"])


def _eval_sets(cfg: RunConfig) -> list[DatasetRef]:
    """Evaluation sets: the dev split (always, for tuning) plus configured tests."""
    sets = [DatasetRef(name=DEV_SET, split="dev")]
    for ref in cfg.tests:
        if ref.name != DEV_SET:
            sets.append(ref)
    return sets


def _set_problems(
    layout: Layout, cfg: RunConfig, ref: DatasetRef
) -> tuple[list[ProblemSpec], list[TestSuite]]:
    if ref.split == "dev":
        problems, suites, _ = _load_train_corpus(layout)
        dev_ids = set(_load_split(layout).dev)
        return ([p for p in problems if p.id in dev_ids],
                [s for s in suites if s.problem_id in dev_ids])
    problems, suites, _ = _load_test_corpus(layout, ref)
    return list(problems), list(suites)


def _generation_source_sets(cfg: RunConfig) -> list[str]:
    """Artifact names that carry generated solutions: the train corpus and
    each file-backed test set."""
    return ["train"] + [ref.name for ref in cfg.tests if ref.path is not None]


def _generated_for_set(layout: Layout, cfg: RunConfig, ref: DatasetRef) -> list[CandidateSolution]:
    if ref.split == "dev":
        path = layout.generated_file("train")
        if not path.is_file():
            raise MissingArtifactError("generate")
        dev_ids = set(_load_split(layout).dev)
        return [s for s in map(_solution_from_record, _read_jsonl(path))
                if s.problem_id in dev_ids]
    path = layout.generated_file(ref.name)
    if not path.is_file():
        raise MissingArtifactError("generate")
    return [_solution_from_record(r) for r in _read_jsonl(path)]


def _labels_for_set(layout: Layout, cfg: RunConfig, ref: DatasetRef) -> list[CorrectnessLabel]:
    if ref.split == "dev":
        path = layout.labels_file("train")
        if not path.is_file():
            raise MissingArtifactError("label")
        dev_ids = set(_load_split(layout).dev)
        return [l for l in map(_label_from_record, _read_jsonl(path))
                if l.problem_id in dev_ids]
    path = layout.labels_file(ref.name)
    if not path.is_file():
        raise MissingArtifactError("label")
    return [_label_from_record(r) for r in _read_jsonl(path)]


def _gold_map(labels: Iterable[CorrectnessLabel]) -> dict[tuple[str, str], int]:
    return {
        (l.problem_id, l.solution_id): 1 if l.verdict == "pass" else 0
        for l in labels
        if l.verdict != "infra_error"
    }


# --- stages -------------------------------------------------------------------


def cmd_ingest(cfg: RunConfig) -> None:
    """Load the train corpus (and file-backed test corpora), validate, split."""
    layout = Layout(cfg.out_dir)
    problems, suites, canonicals = corpus_mod.load_dataset(cfg.train.path, cfg.train.format)
    report = corpus_mod.validate_corpus(problems, suites, canonicals)
    if not report.ok:
        raise ConfigError("train corpus invalid: " + "; ".join(report.issues[:5]))
    split = corpus_mod.split_train_dev(problems, cfg.dev_fraction, cfg.seed)
    layout.corpus_dir.mkdir(parents=True, exist_ok=True)
    corpus_mod.save_native(layout.corpus_dir / "train.jsonl", (problems, suites, canonicals))
    _write_text(
        layout.split_file,
        json.dumps({"train": list(split.train), "dev": list(split.dev), "seed": split.seed},
                   sort_keys=True, indent=2) + "\n",
    )
    stats = {"train_problems": len(split.train), "dev_problems": len(split.dev),
             "tests": {}}
    for ref in cfg.tests:
        if ref.path is None:
            continue
        t_problems, t_suites, t_canonicals = corpus_mod.load_dataset(ref.path, ref.format)
        t_report = corpus_mod.validate_corpus(t_problems, t_suites, t_canonicals)
        if not t_report.ok:
            raise ConfigError(
                f"test corpus {ref.name!r} invalid: " + "; ".join(t_report.issues[:5])
            )
        (layout.corpus_dir / "tests").mkdir(parents=True, exist_ok=True)
        corpus_mod.save_native(layout.corpus_dir / "tests" / f"{ref.name}.jsonl",
                               (t_problems, t_suites, t_canonicals))
        stats["tests"][ref.name] = len(t_problems)
    write_manifest(layout, "ingest", cfg, {}, stats)


def cmd_generate(cfg: RunConfig) -> None:
    """Sample n candidate solutions per problem from the generator backend."""
    layout = Layout(cfg.out_dir)
    parents = require_parents(layout, cfg, ["ingest"])
    backend = cfg.backends["generator"]
    stats = {}
    for set_name in _generation_source_sets(cfg):
        if set_name == "train":
            problems, _, _ = _load_train_corpus(layout)
        else:
            ref = next(r for r in cfg.tests if r.name == set_name)
            problems, _, _ = _load_test_corpus(layout, ref)
        solutions: list[CandidateSolution] = []
        for problem in sorted(problems, key=lambda p: p.id):
            solutions.extend(gateway.generate_solutions(problem, cfg.generation, backend))
        _write_jsonl(layout.generated_file(set_name), map(_solution_record, solutions))
        stats[set_name] = len(solutions)
    write_manifest(layout, "generate", cfg, parents, {"generated": stats})


def _runner_registry(cfg: RunConfig) -> RunnerRegistry:
    registry = RunnerRegistry()
    for language, spec in cfg.runners.items():
        if spec == "stub:marker":
            registry.register(language, marker_stub_runner(STUB_PASS_MARKER))
        else:
            registry.register(language, SubprocessRunner(spec))
    return registry


def cmd_label(cfg: RunConfig) -> None:
    """Execute (or stub-execute) every generated solution against its suite."""
    layout = Layout(cfg.out_dir)
    parents = require_parents(layout, cfg, ["ingest", "generate"])
    registry = _runner_registry(cfg)
    stats = {}
    for set_name in _generation_source_sets(cfg):
        if set_name == "train":
            problems, suites, _ = _load_train_corpus(layout)
        else:
            ref = next(r for r in cfg.tests if r.name == set_name)
            problems, suites, _ = _load_test_corpus(layout, ref)
        gen_path = layout.generated_file(set_name)
        if not gen_path.is_file():
            raise MissingArtifactError("generate")
        solutions = [_solution_from_record(r) for r in _read_jsonl(gen_path)]
        labels = label_corpus(
            corpus_mod.problems_by_id(problems),
            corpus_mod.suites_by_problem(suites),
            solutions, cfg.sandbox, registry,
        )
        _write_jsonl(layout.labels_file(set_name), map(_label_record, labels))
        verdicts: dict[str, int] = {}
        for label in labels:
            verdicts[label.verdict] = verdicts.get(label.verdict, 0) + 1
        stats[set_name] = verdicts
    write_manifest(layout, "label", cfg, parents, {"verdicts": stats})


def cmd_index(cfg: RunConfig) -> None:
    """Build the dual correct/incorrect index from train-split examples only."""
    layout = Layout(cfg.out_dir)
    parents = require_parents(layout, cfg, ["ingest", "generate", "label"])
    problems, _, _ = _load_train_corpus(layout)
    split = _load_split(layout)
    train_ids = set(split.train)
    problems_by = corpus_mod.problems_by_id(problems)
    gen_path = layout.generated_file("train")
    if not gen_path.is_file():
        raise MissingArtifactError("generate")
    solutions = {
        (s.problem_id, s.solution_id): s
        for s in map(_solution_from_record, _read_jsonl(gen_path))
    }
    labels_path = layout.labels_file("train")
    if not labels_path.is_file():
        raise MissingArtifactError("label")
    labels = [_label_from_record(r) for r in _read_jsonl(labels_path)]
    triples = [
        (problems_by[l.problem_id], solutions[(l.problem_id, l.solution_id)], l)
        for l in labels
        if l.problem_id in train_ids and (l.problem_id, l.solution_id) in solutions
    ]
    index = retrieval.build_index(triples, cfg.backends["encoder"])
    retrieval.save_index(index, layout.index_dir)
    n_correct, n_incorrect = index.store_sizes()
    write_manifest(layout, "index", cfg, parents,
                   {"correct": n_correct, "incorrect": n_incorrect})


def _score_cell(
    cfg: RunConfig,
    layout: Layout,
    set_name: str,
    method: str,
    k: int | None,
    pairs: Sequence[tuple[ProblemSpec, CandidateSolution]],
    siblings: Mapping[str, list[CandidateSolution]],
    index: retrieval.ExampleIndex | None,
) -> list[QualityScore]:
    predictor = cfg.backends["predictor"]
    encoder = cfg.backends["encoder"]
    template = PromptTemplate()
    scores: list[QualityScore] = []
    for problem, solution in pairs:
        query = (problem.description, solution.code)
        if method == estimators.METHOD_ZS:
            score = estimators.score_zs(problem.id, solution.solution_id, query,
                                        predictor, template, cfg.prompt_max_chars)
        elif method in cfg.alphas:
            assert index is not None and k is not None
            ncfg = retrieval.NeighborhoodConfig(k=k, alpha=cfg.alphas[method])
            score = estimators.score_fs(problem.id, solution.solution_id, query, index,
                                        ncfg, predictor, encoder, template,
                                        cfg.prompt_max_chars)
        elif method == estimators.METHOD_ELS:
            sibling_codes = [s.code for s in siblings[problem.id]
                             if s.solution_id != solution.solution_id]
            score = estimators.score_els(problem.id, solution.solution_id,
                                         solution.code, sibling_codes, encoder)
        elif method == estimators.METHOD_TLS:
            sibling_codes = [s.code for s in siblings[problem.id]
                             if s.solution_id != solution.solution_id]
            score = estimators.score_tls(problem.id, solution.solution_id,
                                         solution.code, sibling_codes, encoder)
        else:
            raise ConfigError(f"methods: unknown method {method!r}")
        scores.append(score)
        if cfg.prompt_audit and method not in (estimators.METHOD_ELS, estimators.METHOD_TLS):
            context = None
            if method in cfg.alphas:
                assert index is not None and k is not None
                qp = gateway.embed(problem.description, "pooled", encoder)
                qs = gateway.embed(solution.code, "pooled", encoder)
                context = retrieval.retrieve_balanced(
                    qp, qs, index, retrieval.NeighborhoodConfig(k=k, alpha=cfg.alphas[method])
                )
            prompt = estimators.build_prompt(template, context, query,
                                             cfg.prompt_max_chars)
            _write_text(
                layout.prompt_audit_file(set_name, method, k, problem.id,
                                         solution.solution_id),
                prompt,
            )
    scores.sort(key=lambda s: (s.problem_id, s.solution_id))
    return scores


def cmd_predict(cfg: RunConfig) -> None:
    """Score every eval-set pair under every configured method.

    Few-shot methods are scored at every k in the grid so downstream tuning
    and sensitivity sweeps never need to re-run prediction.
    """
    layout = Layout(cfg.out_dir)
    parents = require_parents(layout, cfg, ["ingest", "generate", "label", "index"])
    index = retrieval.load_index(layout.index_dir)
    stats = {}
    for ref in _eval_sets(cfg):
        problems, _ = _set_problems(layout, cfg, ref)
        problems_by = {p.id: p for p in problems}
        solutions = _generated_for_set(layout, cfg, ref)
        labels = _labels_for_set(layout, cfg, ref)
        gold = _gold_map(labels)
        siblings: dict[str, list[CandidateSolution]] = {}
        for s in solutions:
            siblings.setdefault(s.problem_id, []).append(s)
        pairs = [
            (problems_by[s.problem_id], s)
            for s in solutions
            if (s.problem_id, s.solution_id) in gold and s.problem_id in problems_by
        ]
        pairs.sort(key=lambda ps: (ps[0].id, ps[1].solution_id))
        n_files = 0
        for method in cfg.methods:
            ks: tuple[int | None, ...]
            ks = tuple(cfg.k_grid) if method in cfg.alphas else (None,)
            for k in ks:
                scores = _score_cell(cfg, layout, ref.name, method, k, pairs,
                                     siblings, index)
                _write_jsonl(layout.scores_file(ref.name, method, k),
                             map(_score_record, scores))
                n_files += 1
        stats[ref.name] = {"pairs": len(pairs), "score_files": n_files}
    write_manifest(layout, "predict", cfg, parents, {"sets": stats})


def _read_scores(layout: Layout, set_name: str, method: str, k: int | None) -> list[QualityScore]:
    path = layout.scores_file(set_name, method, k)
    if not path.is_file():
        raise MissingArtifactError("predict")
    return [_score_from_record(r) for r in _read_jsonl(path)]


def cmd_tune(cfg: RunConfig) -> None:
    """Choose k per few-shot method by dev-set global nDCG (ties: smallest k)."""
    layout = Layout(cfg.out_dir)
    parents = require_parents(layout, cfg, ["ingest", "generate", "label", "predict"])
    dev_ref = DatasetRef(name=DEV_SET, split="dev")
    gold = _gold_map(_labels_for_set(layout, cfg, dev_ref))
    chosen: dict[str, int] = {}
    tables: dict[str, list[tuple[int, float]]] = {}
    for method in cfg.methods:
        if method not in cfg.alphas:
            continue
        by_k = {k: _read_scores(layout, DEV_SET, method, k) for k in cfg.k_grid}
        result = evaluation.tune_k(by_k, gold)
        chosen[method] = result.chosen_k
        tables[method] = list(result.table)
    layout.tuning_dir.mkdir(parents=True, exist_ok=True)
    _write_text(layout.tuning_dir / "chosen.json",
                json.dumps(chosen, sort_keys=True, indent=2) + "\n")
    lines = ["method,k,dev_global_ndcg"]
    for method in sorted(tables):
        for k, value in tables[method]:
            lines.append(f"{method},{k},{value!r}")
    _write_text(layout.tuning_dir / "tuning.csv", "\n".join(lines) + "\n")
    write_manifest(layout, "tune", cfg, parents, {"chosen_k": chosen})


def cmd_evaluate(cfg: RunConfig) -> None:
    """Global and local nDCG per (method, test set), plus the k sweep table."""
    layout = Layout(cfg.out_dir)
    parents = require_parents(layout, cfg,
                              ["ingest", "generate", "label", "predict", "tune"])
    chosen_path = layout.tuning_dir / "chosen.json"
    if not chosen_path.is_file():
        raise MissingArtifactError("tune")
    chosen = json.loads(chosen_path.read_text(encoding="utf-8"))
    report = evaluation.EvalReport()
    fs_methods = [m for m in cfg.methods if m in cfg.alphas]
    sweep_scores: dict[str, dict[str, dict[int, list[QualityScore]]]] = {}
    gold_by_set: dict[str, dict[tuple[str, str], int]] = {}
    for ref in cfg.tests:
        gold = _gold_map(_labels_for_set(layout, cfg, ref))
        gold_by_set[ref.name] = gold
        sweep_scores[ref.name] = {}
        for method in cfg.methods:
            k = chosen.get(method) if method in cfg.alphas else None
            alpha = cfg.alphas.get(method)
            scores = _read_scores(layout, ref.name, method, k)
            if method in cfg.alphas:
                sweep_scores[ref.name][method] = {
                    kk: _read_scores(layout, ref.name, method, kk) for kk in cfg.k_grid
                }
            try:
                g_value = evaluation.global_ndcg(scores, gold)
            except evaluation.DegenerateLabelsError:
                g_value = None
            report.rows.append(evaluation.ReportRow(
                method=method, test_set=ref.name, scope=evaluation.SCOPE_GLOBAL,
                k=k, alpha=alpha, metric="nDCG", value=g_value,
            ))
            try:
                local = evaluation.local_ndcg(scores, gold)
                l_value, n_excluded = local.value, local.n_excluded
            except evaluation.DegenerateLabelsError:
                l_value, n_excluded = None, 0
            report.rows.append(evaluation.ReportRow(
                method=method, test_set=ref.name, scope=evaluation.SCOPE_LOCAL,
                k=k, alpha=alpha, metric="nDCG", value=l_value,
                n_excluded_problems=n_excluded,
            ))
    sweep_rows = evaluation.sweep_k(sweep_scores, gold_by_set, fs_methods, cfg.k_grid)
    report.tuning = {
        method: {"chosen_k": chosen[method],
                 "table": [[k, v] for k, v in _read_tuning_table(layout)[method]]}
        for method in chosen
    }
    report.metadata = {
        "config_hash": cfg.config_hash,
        "seed": cfg.seed,
        "backends": {role: b.model_name for role, b in sorted(cfg.backends.items())},
        "alphas": cfg.alphas,
        "k_grid": list(cfg.k_grid),
    }
    layout.eval_dir.mkdir(parents=True, exist_ok=True)
    evaluation.write_report_csv(report, layout.eval_dir / "report.csv")
    evaluation.write_report_jsonl(report, layout.eval_dir / "report.jsonl")
    sweep_lines = ["method,k,scope,test_set,value,n_excluded_problems"]
    for row in sweep_rows:
        value = "" if row.value is None else repr(row.value)
        sweep_lines.append(
            f"{row.method},{row.k},{row.scope},{row.test_set},{value},{row.n_excluded}"
        )
    _write_text(layout.eval_dir / "sweep.csv", "\n".join(sweep_lines) + "\n")
    write_manifest(layout, "evaluate", cfg, parents,
                   {"cells": len(report.rows), "sweep_rows": len(sweep_rows)})


def _read_tuning_table(layout: Layout) -> dict[str, list[tuple[int, float]]]:
    path = layout.tuning_dir / "tuning.csv"
    if not path.is_file():
        raise MissingArtifactError("tune")
    tables: dict[str, list[tuple[int, float]]] = {}
    for line in path.read_text(encoding="utf-8").splitlines()[1:]:
        method, k, value = line.split(",")
        tables.setdefault(method, []).append((int(k), float(value)))
    return tables


def cmd_report(cfg: RunConfig) -> None:
    """Assemble the final report; refuses artifacts from mixed configurations."""
    layout = Layout(cfg.out_dir)
    parents = require_parents(layout, cfg, ["evaluate", "tune"])
    # Walk the whole chain: every recorded parent hash must match the
    # manifest bytes currently on disk.
    for stage in STAGES[:-1]:
        manifest, _ = load_manifest(layout, stage)
        for parent_stage, recorded in manifest.get("parents", {}).items():
            _, actual = load_manifest(layout, parent_stage)
            if recorded != actual:
                raise ProvenanceError(
                    f"stage '{stage}' was built against a stale '{parent_stage}' artifact"
                )
    layout.report_dir.mkdir(parents=True, exist_ok=True)
    for name in ("report.csv", "report.jsonl", "sweep.csv"):
        src = layout.eval_dir / name
        if not src.is_file():
            raise MissingArtifactError("evaluate")
        (layout.report_dir / name).write_bytes(src.read_bytes())
    tuning_src = layout.tuning_dir / "tuning.csv"
    if not tuning_src.is_file():
        raise MissingArtifactError("tune")
    (layout.report_dir / "tuning.csv").write_bytes(tuning_src.read_bytes())
    write_manifest(layout, "report", cfg, parents, {"files": 4})


STAGE_FUNCS = {
    "ingest": cmd_ingest,
    "generate": cmd_generate,
    "label": cmd_label,
    "index": cmd_index,
    "predict": cmd_predict,
    "tune": cmd_tune,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def run_stage(stage: str, cfg: RunConfig) -> None:
    if stage not in STAGE_FUNCS:
        raise ConfigError(f"unknown stage {stage!r}")
    STAGE_FUNCS[stage](cfg)


def run_all(cfg: RunConfig) -> None:
    for stage in STAGES:
        run_stage(stage, cfg)
