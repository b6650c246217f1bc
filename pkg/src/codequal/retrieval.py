"""Dual correct/incorrect example indexes and balanced neighborhood retrieval.

Each stored example embeds two fields, the problem text and the solution
code. Query similarity is the alpha-weighted sum of the two field dot
products:

    sigma = alpha * (q_problem . e_problem) + (1 - alpha) * (q_solution . e_solution)

With unit vectors both dot products are cosines, so sigma lies in [-1, 1].
Retrieval is exact: every store member is scored and sorted. Stores of
~10^4 examples make approximate structures pointless here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import CandidateSolution, ProblemSpec
from .executor import CorrectnessLabel
from .gateway import BackendConfig, Embedding, embed_many

LABEL_PASS = "pass"
LABEL_INCORRECT = "incorrect"

ALPHA_PRESETS = {"FS-P": 1.0, "FS-S": 0.0, "FS-PS": 0.5}


class RetrievalError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class EmbeddedExample:
    example_id: str
    problem_id: str
    solution_id: str
    problem_vec: np.ndarray
    solution_vec: np.ndarray
    label: str  # pass | incorrect
    problem_text: str
    solution_text: str

    def __post_init__(self) -> None:
        if self.label not in (LABEL_PASS, LABEL_INCORRECT):
            raise RetrievalError(f"invalid example label {self.label!r}")
        if self.problem_vec.shape != self.solution_vec.shape:
            raise RetrievalError("problem/solution vector dimension mismatch")


@dataclass(frozen=True)
class NeighborhoodConfig:
    k: int
    alpha: float

    def __post_init__(self) -> None:
        if self.k < 1:
            raise RetrievalError("k must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise RetrievalError("alpha must be in [0, 1]")


@dataclass(frozen=True)
class ScoredExample:
    example: EmbeddedExample
    sigma: float


@dataclass(frozen=True)
class BalancedContext:
    """k' top examples from each store, each class sorted by descending sigma."""

    correct: tuple[ScoredExample, ...]
    incorrect: tuple[ScoredExample, ...]

    def __post_init__(self) -> None:
        if len(self.correct) != len(self.incorrect):
            raise RetrievalError("context classes out of balance")

    def __len__(self) -> int:
        return len(self.correct) + len(self.incorrect)

    def interleaved(self) -> list[ScoredExample]:
        """Pairs in (correct_i, incorrect_i) order by descending within-class sigma."""
        out: list[ScoredExample] = []
        for c, i in zip(self.correct, self.incorrect):
            out.append(c)
            out.append(i)
        return out

    def drop_last_pair(self) -> "BalancedContext":
        if not self.correct:
            raise RetrievalError("no pairs left to drop")
        return BalancedContext(correct=self.correct[:-1], incorrect=self.incorrect[:-1])


class ExampleIndex:
    """Two immutable stores of embedded examples plus stacked score matrices."""

    def __init__(
        self,
        correct_store: Sequence[EmbeddedExample],
        incorrect_store: Sequence[EmbeddedExample],
        encoder_tag: str,
        dim: int,
    ):
        self.correct_store = list(correct_store)
        self.incorrect_store = list(incorrect_store)
        self.encoder_tag = encoder_tag
        self.dim = dim
        for store, expected in ((self.correct_store, LABEL_PASS),
                                (self.incorrect_store, LABEL_INCORRECT)):
            for ex in store:
                if ex.label != expected:
                    raise RetrievalError(
                        f"example {ex.example_id} labeled {ex.label!r} in {expected!r} store"
                    )
                if ex.problem_vec.shape[-1] != dim:
                    raise RetrievalError(f"example {ex.example_id} has dim "
                                         f"{ex.problem_vec.shape[-1]}, index dim {dim}")
        ids = [ex.example_id for ex in self.correct_store + self.incorrect_store]
        if len(set(ids)) != len(ids):
            raise RetrievalError("duplicate example_id across stores")

    def store_sizes(self) -> tuple[int, int]:
        return len(self.correct_store), len(self.incorrect_store)


def sigma(
    query_problem_vec: np.ndarray,
    query_solution_vec: np.ndarray,
    example: EmbeddedExample,
    alpha: float,
) -> float:
    """Alpha-weighted field similarity between a query pair and one example."""
    if query_problem_vec.shape != example.problem_vec.shape:
        raise RetrievalError("query/example dimension mismatch")
    return float(
        alpha * (query_problem_vec @ example.problem_vec)
        + (1.0 - alpha) * (query_solution_vec @ example.solution_vec)
    )


def build_index(
    examples: Iterable[tuple[ProblemSpec, CandidateSolution, CorrectnessLabel]],
    encoder: BackendConfig,
) -> ExampleIndex:
    """Embed labeled examples and partition them into the two stores.

    ``pass`` labels land in the correct store, ``fail``/``timeout`` in the
    incorrect store; ``infra_error`` items are excluded entirely.
    """
    triples = [(p, s, l) for p, s, l in examples if l.verdict != "infra_error"]
    if not triples:
        raise RetrievalError("no labeled examples to index")
    problem_vecs = embed_many([p.description for p, _, _ in triples], "pooled", encoder)
    solution_vecs = embed_many([s.code for _, s, _ in triples], "pooled", encoder)
    correct: list[EmbeddedExample] = []
    incorrect: list[EmbeddedExample] = []
    for (problem, solution, label), pv, sv in zip(triples, problem_vecs, solution_vecs):
        ex = EmbeddedExample(
            example_id=f"{problem.id}/{solution.solution_id}",
            problem_id=problem.id,
            solution_id=solution.solution_id,
            problem_vec=pv.vector,
            solution_vec=sv.vector,
            label=LABEL_PASS if label.verdict == "pass" else LABEL_INCORRECT,
            problem_text=problem.description,
            solution_text=solution.code,
        )
        (correct if ex.label == LABEL_PASS else incorrect).append(ex)
    dim = problem_vecs[0].dim
    return ExampleIndex(correct, incorrect, encoder_tag=encoder.model_name, dim=dim)


def _top_of_store(
    store: Sequence[EmbeddedExample],
    query_problem_vec: np.ndarray,
    query_solution_vec: np.ndarray,
    alpha: float,
    k: int,
) -> list[ScoredExample]:
    # One dot product per example rather than a stacked matmul: BLAS gemv
    # results depend on row position at the last bit, which would let
    # bit-identical examples land 1 ulp apart and corrupt the id tie rule.
    scored = [
        (alpha * float(np.dot(ex.problem_vec, query_problem_vec))
         + (1.0 - alpha) * float(np.dot(ex.solution_vec, query_solution_vec)), ex)
        for ex in store
    ]
    scored.sort(key=lambda t: (-t[0], t[1].example_id))
    return [ScoredExample(example=ex, sigma=s) for s, ex in scored[:k]]


def retrieve_balanced(
    query_problem_vec: np.ndarray | Embedding,
    query_solution_vec: np.ndarray | Embedding,
    index: ExampleIndex,
    cfg: NeighborhoodConfig,
) -> BalancedContext:
    """Top-k' examples from each store under sigma, k' = min(k, store sizes).

    Ties break on ascending example_id. Truncating both classes to the
    smaller store keeps the context balanced.
    """
    if isinstance(query_problem_vec, Embedding):
        query_problem_vec = query_problem_vec.vector
    if isinstance(query_solution_vec, Embedding):
        query_solution_vec = query_solution_vec.vector
    n_correct, n_incorrect = index.store_sizes()
    if n_correct == 0 or n_incorrect == 0:
        raise RetrievalError(
            f"both stores must be nonempty (correct={n_correct}, incorrect={n_incorrect})"
        )
    if query_problem_vec.shape[-1] != index.dim:
        raise RetrievalError(
            f"query dim {query_problem_vec.shape[-1]} != index dim {index.dim}"
        )
    k_eff = min(cfg.k, n_correct, n_incorrect)
    correct = _top_of_store(index.correct_store, query_problem_vec, query_solution_vec,
                            cfg.alpha, k_eff)
    incorrect = _top_of_store(index.incorrect_store, query_problem_vec,
                              query_solution_vec, cfg.alpha, k_eff)
    return BalancedContext(correct=tuple(correct), incorrect=tuple(incorrect))


# --- persistence ---------------------------------------------------------


def _example_record(ex: EmbeddedExample) -> dict:
    return {
        "example_id": ex.example_id,
        "problem_id": ex.problem_id,
        "solution_id": ex.solution_id,
        "problem_vec": [float(x) for x in ex.problem_vec],
        "solution_vec": [float(x) for x in ex.solution_vec],
        "label": ex.label,
        "problem_text": ex.problem_text,
        "solution_text": ex.solution_text,
    }


def save_index(index: ExampleIndex, directory: str | Path) -> None:
    """Persist as a manifest plus one record-per-line file per store."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "encoder_tag": index.encoder_tag,
        "dim": index.dim,
        "n_correct": len(index.correct_store),
        "n_incorrect": len(index.incorrect_store),
    }
    (directory / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    for name, store in (("correct", index.correct_store), ("incorrect", index.incorrect_store)):
        with (directory / f"{name}.jsonl").open("w", encoding="utf-8") as fh:
            for ex in sorted(store, key=lambda e: e.example_id):
                fh.write(json.dumps(_example_record(ex), sort_keys=True) + "\n")


def load_index(directory: str | Path) -> ExampleIndex:
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.is_file():
        raise RetrievalError(f"index manifest not found: {manifest_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    stores: dict[str, list[EmbeddedExample]] = {"correct": [], "incorrect": []}
    for name in stores:
        path = directory / f"{name}.jsonl"
        if not path.is_file():
            raise RetrievalError(f"index store file not found: {path}")
        with path.open("r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                stores[name].append(
                    EmbeddedExample(
                        example_id=rec["example_id"],
                        problem_id=rec["problem_id"],
                        solution_id=rec["solution_id"],
                        problem_vec=np.asarray(rec["problem_vec"], dtype=np.float64),
                        solution_vec=np.asarray(rec["solution_vec"], dtype=np.float64),
                        label=rec["label"],
                        problem_text=rec["problem_text"],
                        solution_text=rec["solution_text"],
                    )
                )
    counts = (len(stores["correct"]), len(stores["incorrect"]))
    if counts != (manifest["n_correct"], manifest["n_incorrect"]):
        raise RetrievalError(f"index store counts {counts} disagree with manifest")
    return ExampleIndex(
        stores["correct"], stores["incorrect"],
        encoder_tag=manifest["encoder_tag"], dim=int(manifest["dim"]),
    )
