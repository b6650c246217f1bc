"""Benchmark corpus loading, validation, and train/dev splitting.

A corpus is a triple of problems, test suites, and candidate solutions.
Two line-oriented JSON input formats are supported (``mbpp-style`` and
``humaneval-style``), plus a native export that round-trips the internal
model exactly. Loaded objects are immutable and safe to share across
threads.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence


class CorpusError(ValueError):
    """Raised for unreadable files, malformed records, or duplicate ids."""


@dataclass(frozen=True)
class ProblemSpec:
    """A natural-language task, optionally with an entry point and setup."""

    id: str
    description: str
    entry_point: str | None = None
    language: str = "python"
    setup_code: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise CorpusError("problem id must be nonempty")
        if not self.description:
            raise CorpusError(f"problem {self.id!r}: description must be nonempty")


@dataclass(frozen=True)
class TestSuite:
    """Ordered assertion sources for one problem."""

    problem_id: str
    cases: tuple[str, ...]
    setup_code: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "cases", tuple(self.cases))
        if not self.cases:
            raise CorpusError(f"suite for {self.problem_id!r}: cases must be nonempty")


@dataclass(frozen=True)
class CandidateSolution:
    """One generated (or canonical) code string for a problem."""

    problem_id: str
    solution_id: str
    code: str
    rank_hint: int | None = None
    generator_tag: str = ""

    def __post_init__(self) -> None:
        if not self.code:
            raise CorpusError(
                f"solution {self.problem_id!r}/{self.solution_id!r}: code must be nonempty"
            )


@dataclass(frozen=True)
class DatasetSplit:
    """Disjoint, exhaustive train/dev partition of problem ids."""

    train: tuple[str, ...]
    dev: tuple[str, ...]
    seed: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "train", tuple(self.train))
        object.__setattr__(self, "dev", tuple(self.dev))
        overlap = set(self.train) & set(self.dev)
        if overlap:
            raise CorpusError(f"split overlap: {sorted(overlap)[:5]}")


@dataclass
class ValidationReport:
    """Outcome of :func:`validate_corpus`; report-only, never raises."""

    issues: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues


Corpus = tuple[list[ProblemSpec], list[TestSuite], list[CandidateSolution]]

CANONICAL_TAG = "canonical"


def _require(record: dict, key: str, lineno: int) -> object:
    if key not in record:
        raise CorpusError(f"line {lineno}: missing required field {key!r}")
    return record[key]


def _parse_mbpp(record: dict, lineno: int) -> tuple[ProblemSpec, TestSuite, CandidateSolution]:
    task_id = str(_require(record, "task_id", lineno))
    text = str(_require(record, "text", lineno))
    code = str(_require(record, "code", lineno))
    test_list = _require(record, "test_list", lineno)
    if not isinstance(test_list, list) or not test_list:
        raise CorpusError(f"line {lineno}: test_list must be a nonempty array")
    setup = record.get("test_setup_code") or None
    problem = ProblemSpec(id=task_id, description=text, language="python")
    suite = TestSuite(problem_id=task_id, cases=tuple(str(t) for t in test_list), setup_code=setup)
    canonical = CandidateSolution(
        problem_id=task_id, solution_id=CANONICAL_TAG, code=code, generator_tag=CANONICAL_TAG
    )
    return problem, suite, canonical


def _parse_humaneval(record: dict, lineno: int) -> tuple[ProblemSpec, TestSuite, CandidateSolution]:
    task_id = str(_require(record, "task_id", lineno))
    prompt = str(_require(record, "prompt", lineno))
    solution_body = str(_require(record, "canonical_solution", lineno))
    test = str(_require(record, "test", lineno))
    entry_point = str(_require(record, "entry_point", lineno))
    problem = ProblemSpec(
        id=task_id, description=prompt, entry_point=entry_point, language="python"
    )
    # The test blob defines check(candidate); a single case invokes it.
    case = f"{test}\n\ncheck({entry_point})\n"
    suite = TestSuite(problem_id=task_id, cases=(case,))
    canonical = CandidateSolution(
        problem_id=task_id,
        solution_id=CANONICAL_TAG,
        code=prompt + solution_body,
        generator_tag=CANONICAL_TAG,
    )
    return problem, suite, canonical


_PARSERS = {"mbpp-style": _parse_mbpp, "humaneval-style": _parse_humaneval}


def load_dataset(path: str | Path, format_tag: str) -> Corpus:
    """Load a line-oriented benchmark file into the internal model.

    Every record yields exactly one problem and suite, plus the canonical
    solution when the record carries one. Malformed lines are rejected
    with their 1-based line number.
    """
    if format_tag not in _PARSERS:
        raise CorpusError(f"unknown format tag {format_tag!r}")
    parse = _PARSERS[format_tag]
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"dataset file not found: {path}")
    problems: list[ProblemSpec] = []
    suites: list[TestSuite] = []
    solutions: list[CandidateSolution] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: unparseable JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise CorpusError(f"line {lineno}: record must be a JSON object")
            try:
                problem, suite, canonical = parse(record, lineno)
            except CorpusError as exc:
                if f"line {lineno}" in str(exc):
                    raise
                raise CorpusError(f"line {lineno}: {exc}") from exc
            if problem.id in seen:
                raise CorpusError(f"line {lineno}: duplicate problem id {problem.id!r}")
            seen.add(problem.id)
            problems.append(problem)
            suites.append(suite)
            solutions.append(canonical)
    return problems, suites, solutions


def split_train_dev(
    problems: Sequence[ProblemSpec], dev_fraction: float, seed: int
) -> DatasetSplit:
    """Partition problem ids into train/dev with a seeded uniform shuffle.

    Ids are sorted, shuffled by ``random.Random(seed)``, and the prefix of
    ``round(dev_fraction * N)`` ids becomes the dev set. Deterministic
    given the seed and independent of input ordering.
    """
    if not 0 < dev_fraction < 1:
        raise CorpusError(f"dev_fraction must be in (0, 1), got {dev_fraction}")
    if len(problems) < 2:
        raise CorpusError("need at least 2 problems to split")
    ids = sorted(p.id for p in problems)
    if len(set(ids)) != len(ids):
        raise CorpusError("duplicate problem ids in split input")
    rng = random.Random(seed)
    rng.shuffle(ids)
    dev_n = round(dev_fraction * len(ids))
    dev = tuple(sorted(ids[:dev_n]))
    train = tuple(sorted(ids[dev_n:]))
    return DatasetSplit(train=train, dev=dev, seed=seed)


def validate_corpus(
    problems: Sequence[ProblemSpec],
    suites: Sequence[TestSuite],
    solutions: Sequence[CandidateSolution],
) -> ValidationReport:
    """Cross-check references and uniqueness; returns a report, never raises."""
    report = ValidationReport()
    known: set[str] = set()
    for p in problems:
        if p.id in known:
            report.issues.append(f"duplicate problem id: {p.id}")
        known.add(p.id)
    suite_owners: set[str] = set()
    for s in suites:
        if s.problem_id not in known:
            report.issues.append(f"suite references unknown problem_id: {s.problem_id}")
        if s.problem_id in suite_owners:
            report.issues.append(f"duplicate suite for problem: {s.problem_id}")
        suite_owners.add(s.problem_id)
    seen_solutions: set[tuple[str, str]] = set()
    for sol in solutions:
        if sol.problem_id not in known:
            report.issues.append(
                f"solution {sol.solution_id} references unknown problem_id: {sol.problem_id}"
            )
        key = (sol.problem_id, sol.solution_id)
        if key in seen_solutions:
            report.issues.append(f"duplicate solution id: {key[0]}/{key[1]}")
        seen_solutions.add(key)
    return report


# --- native export -------------------------------------------------------

_KINDS = {"problem": ProblemSpec, "suite": TestSuite, "solution": CandidateSolution}


def _to_record(kind: str, obj) -> dict:
    rec = {"kind": kind}
    for f in fields(obj):
        value = getattr(obj, f.name)
        if isinstance(value, tuple):
            value = list(value)
        rec[f.name] = value
    return rec


def save_native(path: str | Path, corpus: Corpus) -> None:
    """Write the corpus as one JSON object per line, mirroring field names."""
    problems, suites, solutions = corpus
    with Path(path).open("w", encoding="utf-8") as fh:
        for kind, items in (("problem", problems), ("suite", suites), ("solution", solutions)):
            for obj in items:
                fh.write(json.dumps(_to_record(kind, obj), sort_keys=True) + "\n")


def load_native(path: str | Path) -> Corpus:
    """Reload a :func:`save_native` file; round-trips the corpus exactly."""
    problems: list[ProblemSpec] = []
    suites: list[TestSuite] = []
    solutions: list[CandidateSolution] = []
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"native corpus file not found: {path}")
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: unparseable JSON ({exc.msg})") from exc
            kind = rec.pop("kind", None)
            if kind not in _KINDS:
                raise CorpusError(f"line {lineno}: unknown record kind {kind!r}")
            cls = _KINDS[kind]
            try:
                obj = cls(**rec)
            except TypeError as exc:
                raise CorpusError(f"line {lineno}: bad {kind} record ({exc})") from exc
            if kind == "problem":
                problems.append(obj)
            elif kind == "suite":
                suites.append(obj)
            else:
                solutions.append(obj)
    return problems, suites, solutions


def problems_by_id(problems: Iterable[ProblemSpec]) -> dict[str, ProblemSpec]:
    return {p.id: p for p in problems}


def suites_by_problem(suites: Iterable[TestSuite]) -> dict[str, TestSuite]:
    return {s.problem_id: s for s in suites}
