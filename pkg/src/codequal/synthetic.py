"""Deterministic toy corpora for offline pipeline runs and self-tests.

Problems are tiny integer functions with real assert suites, so they can
be labeled by an actual runner. Generated solution variants carry the stub
markers from :mod:`codequal.gateway`, which keeps the marker stub runner,
the oracle stub predictor, and genuine execution in agreement about which
solutions are correct.
"""

from __future__ import annotations

import json
import random
from pathlib import Path
from typing import Sequence

from .corpus import CandidateSolution, Corpus, ProblemSpec, TestSuite
from .gateway import STUB_FAIL_MARKER, STUB_PASS_MARKER

_PHRASINGS = (
    "Write a function {entry}(x) that returns {what}.",
    "Implement {entry}(x) computing {what}.",
    "Define {entry}(x); it should return {what} for any integer x.",
)


def _family(index: int, seed: int) -> dict:
    # str seeds hash via sha512 inside random.Random, stable across processes
    rng = random.Random(f"fam:{seed}:{index}")
    kind = index % 3
    c = rng.randrange(2, 50)
    if kind == 0:
        return {
            "entry": f"shift_{index}",
            "what": f"x plus {c}",
            "expr": f"x + {c}",
            "wrong_expr": f"x + {c + 1 + rng.randrange(3)}",
            "probes": (0, 7, -3),
            "value": lambda x, c=c: x + c,
        }
    if kind == 1:
        return {
            "entry": f"scale_{index}",
            "what": f"x times {c}",
            "expr": f"x * {c}",
            "wrong_expr": f"x * {c} + {1 + rng.randrange(3)}",
            "probes": (0, 2, -1),
            "value": lambda x, c=c: x * c,
        }
    return {
        "entry": f"poly_{index}",
        "what": f"x squared plus {c}",
        "expr": f"x * x + {c}",
        "wrong_expr": f"x * x - {c}",
        "probes": (0, 3, -2),
        "value": lambda x, c=c: x * x + c,
    }


def _problem_index(problem_id: str) -> int:
    return int(problem_id.rsplit("-", 1)[1])


def make_problems(
    n_problems: int, seed: int = 0
) -> tuple[list[ProblemSpec], list[TestSuite], list[CandidateSolution]]:
    """Toy problems with assert suites and marker-bearing canonical solutions."""
    problems: list[ProblemSpec] = []
    suites: list[TestSuite] = []
    canonicals: list[CandidateSolution] = []
    for i in range(n_problems):
        fam = _family(i, seed)
        pid = f"syn-{i:04d}"
        entry = fam["entry"]
        description = _PHRASINGS[i % len(_PHRASINGS)].format(entry=entry, what=fam["what"])
        cases = tuple(
            f"assert {entry}({x}) == {fam['value'](x)}" for x in fam["probes"]
        )
        code = (
            f"def {entry}(x):\n"
            f"    {STUB_PASS_MARKER}\n"
            f"    return {fam['expr']}\n"
        )
        problems.append(ProblemSpec(id=pid, description=description,
                                    entry_point=entry, language="python"))
        suites.append(TestSuite(problem_id=pid, cases=cases))
        canonicals.append(CandidateSolution(problem_id=pid, solution_id="canonical",
                                            code=code, generator_tag="canonical"))
    return problems, suites, canonicals


_CORRECT_SHAPES = (
    "def {entry}(x):\n    {marker}\n    return {expr}\n",
    "def {entry}(x):\n    {marker}\n    result = {expr}\n    return result\n",
    "def {entry}(x):\n    {marker}\n    value = x\n    return {expr_value}\n",
)

_WRONG_SHAPES = (
    "def {entry}(x):\n    {marker}\n    return {expr}\n",
    "def {entry}(x):\n    {marker}\n    out = {expr}\n    return out\n",
)


def make_solutions(problem: ProblemSpec, n: int = 10, seed: int = 0) -> list[CandidateSolution]:
    """n runnable solution variants, a seeded mix of correct and broken ones.

    At least one of each class is always present (for n >= 2), so
    per-problem rankings carry signal.
    """
    fam = _family(_problem_index(problem.id), seed)
    rng = random.Random(f"sol:{seed}:{problem.id}")
    if n == 1:
        correct_set = {0}
    else:
        n_correct = 1 + rng.randrange(n - 1)
        correct_set = set(rng.sample(range(n), n_correct))
    solutions = []
    for j in range(n):
        if j in correct_set:
            shape = _CORRECT_SHAPES[rng.randrange(len(_CORRECT_SHAPES))]
            code = shape.format(entry=fam["entry"], marker=STUB_PASS_MARKER,
                                expr=fam["expr"],
                                expr_value=fam["expr"].replace("x", "value"))
        else:
            shape = _WRONG_SHAPES[rng.randrange(len(_WRONG_SHAPES))]
            code = shape.format(entry=fam["entry"], marker=STUB_FAIL_MARKER,
                                expr=fam["wrong_expr"])
        solutions.append(
            CandidateSolution(problem_id=problem.id, solution_id=f"v{j + 1:02d}",
                              code=code, rank_hint=j + 1, generator_tag="synthetic")
        )
    return solutions


def make_mini_corpus(n_problems: int = 20, seed: int = 0) -> Corpus:
    """Problems, suites, and canonical solutions in one corpus tuple."""
    return make_problems(n_problems, seed=seed)


def write_mbpp_style(
    path: str | Path,
    problems: Sequence[ProblemSpec],
    suites: Sequence[TestSuite],
    canonicals: Sequence[CandidateSolution],
) -> None:
    """Serialize a toy corpus as an MBPP-style JSONL file."""
    suites_by = {s.problem_id: s for s in suites}
    code_by = {c.problem_id: c.code for c in canonicals}
    with Path(path).open("w", encoding="utf-8") as fh:
        for p in problems:
            record = {
                "task_id": p.id,
                "text": p.description,
                "code": code_by[p.id],
                "test_list": list(suites_by[p.id].cases),
            }
            if suites_by[p.id].setup_code:
                record["test_setup_code"] = suites_by[p.id].setup_code
            fh.write(json.dumps(record, sort_keys=True) + "\n")
