"""Quality scoring methods for (problem, solution) pairs.

Six methods share one output type:

* ``ZS``    zero-shot yes/no posterior on instruction + query alone
* ``FS-P``  few-shot, neighbors by problem similarity (alpha = 1)
* ``FS-S``  few-shot, neighbors by solution similarity (alpha = 0)
* ``FS-PS`` few-shot, both fields weighted equally (alpha = 0.5)
* ``ELS``   mean classifier-token cosine against sibling solutions
* ``TLS``   mean token-level greedy-matching F1 against sibling solutions

The few-shot prompt interleaves correct/incorrect example pairs by
descending similarity, each closing with its gold yes/no answer, and ends
with the query block and a bare answer cue. An empty context renders the
zero-shot prompt byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .gateway import BackendConfig, embed, yes_no_posterior
from .retrieval import (
    ALPHA_PRESETS,
    BalancedContext,
    ExampleIndex,
    NeighborhoodConfig,
    retrieve_balanced,
)

METHOD_ZS = "ZS"
METHOD_ELS = "ELS"
METHOD_TLS = "TLS"
FS_METHODS = tuple(ALPHA_PRESETS)  # FS-P, FS-S, FS-PS
ALL_METHODS = (METHOD_ZS, *FS_METHODS, METHOD_ELS, METHOD_TLS)

LABEL_WORD = {"pass": "yes", "incorrect": "no"}

DEFAULT_INSTRUCTION = (
    "You are an experienced software engineer. Your task is to check the "
    "functional correctness of code for the given problem statement. "
    "Generate 'yes' if the code is functionally correct (i.e., code meets "
    "the problem's requirements), otherwise generate 'no'."
)

DEFAULT_EXAMPLE_BLOCK = "Problem:\n{problem}\n\nCode:\n{code}\n\nAnswer: {label}\n\n"
DEFAULT_INPUT_BLOCK = "Problem:\n{problem}\n\nCode:\n{code}\n\nAnswer:"


class EstimatorError(RuntimeError):
    pass


class PromptTooLongError(EstimatorError):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    instruction: str = DEFAULT_INSTRUCTION
    example_block_format: str = DEFAULT_EXAMPLE_BLOCK
    input_block_format: str = DEFAULT_INPUT_BLOCK

    def render_example(self, problem: str, code: str, label_word: str) -> str:
        return (
            self.example_block_format.replace("{problem}", problem)
            .replace("{code}", code)
            .replace("{label}", label_word)
        )

    def render_input(self, problem: str, code: str) -> str:
        return self.input_block_format.replace("{problem}", problem).replace("{code}", code)


@dataclass(frozen=True)
class QualityScore:
    problem_id: str
    solution_id: str
    method: str
    score: float
    k_used: int | None = None
    alpha_used: float | None = None
    context_example_ids: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "context_example_ids", tuple(self.context_example_ids))


def method_for_alpha(alpha: float) -> str:
    for name, preset in ALPHA_PRESETS.items():
        if alpha == preset:
            return name
    return f"FS-a{alpha:g}"


def _assemble(
    template: PromptTemplate,
    context: BalancedContext | None,
    query: tuple[str, str],
) -> str:
    problem_text, solution_code = query
    parts = [template.instruction, "\n\n"]
    if context is not None:
        for scored in context.interleaved():
            ex = scored.example
            parts.append(
                template.render_example(ex.problem_text, ex.solution_text,
                                        LABEL_WORD[ex.label])
            )
    parts.append(template.render_input(problem_text, solution_code))
    return "".join(parts)


def build_prompt(
    template: PromptTemplate,
    context: BalancedContext | None,
    query: tuple[str, str],
    max_chars: int | None = None,
) -> str:
    """Render the (few-shot) prompt, shrinking the context to fit if needed.

    On overflow the lowest-similarity pair (one correct plus one incorrect)
    is dropped and rendering retried, preserving balance. A query that
    overflows even with an empty context is an error.
    """
    if not query[0] or not query[1]:
        raise EstimatorError("query problem text and solution code must be nonempty")
    prompt = _assemble(template, context, query)
    if max_chars is None:
        return prompt
    while len(prompt) > max_chars and context is not None and len(context) > 0:
        context = context.drop_last_pair()
        prompt = _assemble(template, context, query)
    if len(prompt) > max_chars:
        raise PromptTooLongError(
            f"prompt is {len(prompt)} chars even with no examples (limit {max_chars})"
        )
    return prompt


def _shrink_to_fit(
    template: PromptTemplate,
    context: BalancedContext,
    query: tuple[str, str],
    max_chars: int | None,
) -> BalancedContext:
    if max_chars is None:
        return context
    while len(context) > 0 and len(_assemble(template, context, query)) > max_chars:
        context = context.drop_last_pair()
    return context


def score_with_context(
    problem_id: str,
    solution_id: str,
    query: tuple[str, str],
    context: BalancedContext | None,
    predictor: BackendConfig,
    template: PromptTemplate = PromptTemplate(),
    method: str = METHOD_ZS,
    k_used: int | None = None,
    alpha_used: float | None = None,
    max_chars: int | None = None,
) -> QualityScore:
    """Shared ZS/FS path: render the prompt, take p_yes as the score."""
    if context is not None and max_chars is not None:
        context = _shrink_to_fit(template, context, query, max_chars)
    prompt = build_prompt(template, context, query, max_chars=max_chars)
    posterior = yes_no_posterior(prompt, predictor)
    context_ids = tuple(
        s.example.example_id for s in (context.interleaved() if context else [])
    )
    return QualityScore(
        problem_id=problem_id,
        solution_id=solution_id,
        method=method,
        score=posterior.p_yes,
        k_used=k_used,
        alpha_used=alpha_used,
        context_example_ids=context_ids,
    )


def score_zs(
    problem_id: str,
    solution_id: str,
    query: tuple[str, str],
    predictor: BackendConfig,
    template: PromptTemplate = PromptTemplate(),
    max_chars: int | None = None,
) -> QualityScore:
    """Zero-shot: instruction plus the query pair, no examples."""
    return score_with_context(
        problem_id, solution_id, query, None, predictor, template,
        method=METHOD_ZS, max_chars=max_chars,
    )


def score_fs(
    problem_id: str,
    solution_id: str,
    query: tuple[str, str],
    index: ExampleIndex,
    cfg: NeighborhoodConfig,
    predictor: BackendConfig,
    encoder: BackendConfig,
    template: PromptTemplate = PromptTemplate(),
    max_chars: int | None = None,
) -> QualityScore:
    """Few-shot: retrieve a balanced neighborhood for the query, then score."""
    problem_text, solution_code = query
    if index.encoder_tag != encoder.model_name:
        raise EstimatorError(
            f"index was built with encoder {index.encoder_tag!r}, "
            f"queries use {encoder.model_name!r}"
        )
    query_pv = embed(problem_text, "pooled", encoder)
    query_sv = embed(solution_code, "pooled", encoder)
    if query_pv.dim != index.dim:
        raise EstimatorError(
            f"encoder dim {query_pv.dim} does not match index dim {index.dim}"
        )
    context = retrieve_balanced(query_pv, query_sv, index, cfg)
    return score_with_context(
        problem_id, solution_id, query, context, predictor, template,
        method=method_for_alpha(cfg.alpha), k_used=cfg.k, alpha_used=cfg.alpha,
        max_chars=max_chars,
    )


def score_els(
    problem_id: str,
    solution_id: str,
    target_code: str,
    sibling_codes: Sequence[str],
    encoder: BackendConfig,
) -> QualityScore:
    """Mean cosine between the classifier-token vectors of target and siblings."""
    if not sibling_codes:
        raise EstimatorError("ELS requires at least one sibling solution")
    target = embed(target_code, "cls", encoder).vector
    sims = [float(target @ embed(code, "cls", encoder).vector) for code in sibling_codes]
    return QualityScore(
        problem_id=problem_id, solution_id=solution_id,
        method=METHOD_ELS, score=float(np.mean(sims)),
    )


def greedy_match_f1(target_tokens: np.ndarray, sibling_tokens: np.ndarray) -> float:
    """Token-level greedy matching F1 between two (t, d) unit-vector matrices.

    Precision: mean over target tokens of the best cosine against sibling
    tokens; recall: the symmetric quantity; negatives clamp to zero so the
    score stays in [0, 1].
    """
    if target_tokens.size == 0 or sibling_tokens.size == 0:
        raise EstimatorError("empty token sequence in greedy matching")
    sims = target_tokens @ sibling_tokens.T
    precision = float(np.mean(np.maximum(sims.max(axis=1), 0.0)))
    recall = float(np.mean(np.maximum(sims.max(axis=0), 0.0)))
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def score_tls(
    problem_id: str,
    solution_id: str,
    target_code: str,
    sibling_codes: Sequence[str],
    encoder: BackendConfig,
) -> QualityScore:
    """Mean greedy-matching F1 between target and sibling token embeddings."""
    if not sibling_codes:
        raise EstimatorError("TLS requires at least one sibling solution")
    target = embed(target_code, "per_token", encoder).vector
    f1s = [
        greedy_match_f1(target, embed(code, "per_token", encoder).vector)
        for code in sibling_codes
    ]
    return QualityScore(
        problem_id=problem_id, solution_id=solution_id,
        method=METHOD_TLS, score=float(np.mean(f1s)),
    )
