"""Two-level ranking quality for quality estimators: global and local nDCG.

Gold labels are Boolean (a solution passes its whole suite or not), so
gains are binary and the discount is 1/log2(rank + 1). The global scope
ranks every (problem, solution) pair in one list; the local scope ranks
each problem's solutions separately and averages over problems that carry
both a correct and an incorrect solution. Score ties always break on
ascending (problem_id, solution_id) so results are reproducible across
runs and platforms.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .estimators import QualityScore

SCOPE_GLOBAL = "global"
SCOPE_LOCAL = "local"


class EvaluationError(ValueError):
    pass


class DegenerateLabelsError(EvaluationError):
    """Raised when a ranking carries only one gold class, so nDCG is undefined."""


@dataclass(frozen=True)
class RankedItem:
    problem_id: str
    solution_id: str
    score: float
    gold: int


@dataclass(frozen=True)
class RankedList:
    """Items sorted by descending score, ties by ascending ids."""

    items: tuple[RankedItem, ...]
    scope: str  # "global" or "local:<problem_id>"

    def gold_sequence(self) -> list[int]:
        return [it.gold for it in self.items]


def rank_items(
    scores: Sequence[QualityScore],
    gold: Mapping[tuple[str, str], int],
    scope: str,
) -> RankedList:
    items = []
    for s in scores:
        key = (s.problem_id, s.solution_id)
        if key not in gold:
            raise EvaluationError(f"no gold label for pair {key}")
        items.append(
            RankedItem(problem_id=s.problem_id, solution_id=s.solution_id,
                       score=s.score, gold=int(gold[key]))
        )
    items.sort(key=lambda it: (-it.score, it.problem_id, it.solution_id))
    return RankedList(items=tuple(items), scope=scope)


def ndcg(gold_in_ranked_order: Sequence[int]) -> float:
    """Binary nDCG of a gold sequence read off a ranked list.

    DCG = sum_i g_i / log2(i + 1) with 1-based ranks; the ideal ordering
    puts every 1 first. Undefined (raises) when no relevant item exists.
    """
    golds = [int(g) for g in gold_in_ranked_order]
    if not golds:
        raise EvaluationError("ndcg of an empty list is undefined")
    if any(g not in (0, 1) for g in golds):
        raise EvaluationError("gold labels must be 0 or 1")
    n_rel = sum(golds)
    if n_rel == 0:
        raise DegenerateLabelsError("ndcg undefined: no relevant items")
    dcg = sum(g / math.log2(i + 1) for i, g in enumerate(golds, start=1))
    idcg = sum(1.0 / math.log2(i + 1) for i in range(1, n_rel + 1))
    return dcg / idcg


def global_ndcg(
    scores: Sequence[QualityScore], gold: Mapping[tuple[str, str], int]
) -> float:
    """Single nDCG over all pairs ranked together."""
    if not scores:
        raise EvaluationError("no scores to evaluate")
    ranked = rank_items(scores, gold, SCOPE_GLOBAL)
    golds = ranked.gold_sequence()
    if sum(golds) == 0:
        raise DegenerateLabelsError("global ndcg undefined: all pairs incorrect")
    if sum(golds) == len(golds):
        raise DegenerateLabelsError("global ndcg undefined: all pairs correct")
    return ndcg(golds)


@dataclass(frozen=True)
class LocalNdcgResult:
    value: float
    n_problems: int
    n_excluded: int  # problems with single-class gold, excluded from the mean


def local_ndcg(
    scores: Sequence[QualityScore], gold: Mapping[tuple[str, str], int]
) -> LocalNdcgResult:
    """Per-problem nDCG averaged over problems with both gold classes.

    Degenerate problems (all-correct or all-incorrect) carry no ranking
    signal; they are excluded from the mean and counted in the result.
    """
    by_problem: dict[str, list[QualityScore]] = {}
    for s in scores:
        by_problem.setdefault(s.problem_id, []).append(s)
    values = []
    excluded = 0
    for pid in sorted(by_problem):
        ranked = rank_items(by_problem[pid], gold, f"{SCOPE_LOCAL}:{pid}")
        golds = ranked.gold_sequence()
        if sum(golds) == 0 or sum(golds) == len(golds):
            excluded += 1
            continue
        values.append(ndcg(golds))
    if not values:
        raise DegenerateLabelsError("local ndcg undefined: no problem has both classes")
    return LocalNdcgResult(
        value=sum(values) / len(values), n_problems=len(by_problem), n_excluded=excluded
    )


@dataclass(frozen=True)
class TuneResult:
    chosen_k: int
    table: tuple[tuple[int, float], ...]  # (k, dev global nDCG), ascending k


def tune_k(
    dev_scores_by_k: Mapping[int, Sequence[QualityScore]],
    gold: Mapping[tuple[str, str], int],
) -> TuneResult:
    """Pick the k maximizing dev-set global nDCG; ties go to the smallest k."""
    if not dev_scores_by_k:
        raise EvaluationError("empty k grid")
    table = []
    for k in sorted(dev_scores_by_k):
        table.append((k, global_ndcg(dev_scores_by_k[k], gold)))
    best_k, _ = max(table, key=lambda kv: (kv[1], -kv[0]))
    return TuneResult(chosen_k=best_k, table=tuple(table))


@dataclass(frozen=True)
class SweepRow:
    method: str
    k: int
    scope: str
    test_set: str
    value: float | None
    n_excluded: int = 0


def sweep_k(
    scores: Mapping[str, Mapping[str, Mapping[int, Sequence[QualityScore]]]],
    gold_by_set: Mapping[str, Mapping[tuple[str, str], int]],
    methods: Sequence[str],
    k_grid: Sequence[int],
    scopes: Sequence[str] = (SCOPE_GLOBAL, SCOPE_LOCAL),
) -> list[SweepRow]:
    """Metric value per (method, k, scope, test_set); undefined cells get None.

    ``scores[test_set][method][k]`` holds the score list for one cell.
    """
    rows: list[SweepRow] = []
    for test_set in sorted(scores):
        gold = gold_by_set[test_set]
        for method in methods:
            for k in k_grid:
                cell = scores[test_set].get(method, {}).get(k)
                for scope in scopes:
                    if cell is None:
                        rows.append(SweepRow(method, k, scope, test_set, None))
                        continue
                    try:
                        if scope == SCOPE_GLOBAL:
                            rows.append(
                                SweepRow(method, k, scope, test_set, global_ndcg(cell, gold))
                            )
                        else:
                            local = local_ndcg(cell, gold)
                            rows.append(
                                SweepRow(method, k, scope, test_set, local.value,
                                         local.n_excluded)
                            )
                    except DegenerateLabelsError:
                        rows.append(SweepRow(method, k, scope, test_set, None))
    return rows


# --- report --------------------------------------------------------------

REPORT_COLUMNS = (
    "method", "test_set", "scope", "k", "alpha", "metric", "value",
    "n_excluded_problems",
)


@dataclass(frozen=True)
class ReportRow:
    method: str
    test_set: str
    scope: str
    k: int | None
    alpha: float | None
    metric: str
    value: float | None  # None = undefined for this cell
    n_excluded_problems: int = 0

    def __post_init__(self) -> None:
        if self.value is not None and not 0.0 <= self.value <= 1.0:
            raise EvaluationError(f"metric value out of [0,1]: {self.value}")


@dataclass
class EvalReport:
    rows: list[ReportRow] = field(default_factory=list)
    tuning: dict[str, dict] = field(default_factory=dict)  # method -> {table, chosen_k}
    metadata: dict = field(default_factory=dict)


def _cell_str(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_report_csv(report: EvalReport, path: str | Path) -> None:
    """Wide comma-separated table, one row per (method, set, scope) cell."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for row in report.rows:
            writer.writerow([
                row.method, row.test_set, row.scope,
                _cell_str(row.k), _cell_str(row.alpha), row.metric,
                _cell_str(row.value), row.n_excluded_problems,
            ])


def write_report_jsonl(report: EvalReport, path: str | Path) -> None:
    """Machine-readable mirror: one JSON object per row, then tuning + metadata."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for row in report.rows:
            fh.write(json.dumps({
                "kind": "cell", "method": row.method, "test_set": row.test_set,
                "scope": row.scope, "k": row.k, "alpha": row.alpha,
                "metric": row.metric, "value": row.value,
                "n_excluded_problems": row.n_excluded_problems,
            }, sort_keys=True) + "\n")
        for method in sorted(report.tuning):
            fh.write(json.dumps(
                {"kind": "tuning", "method": method, **report.tuning[method]},
                sort_keys=True) + "\n")
        fh.write(json.dumps({"kind": "metadata", **report.metadata}, sort_keys=True) + "\n")
