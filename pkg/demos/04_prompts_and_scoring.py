"""Prompt assembly and yes/no-posterior scoring.

The score of a (problem, solution) pair is the probability of the `yes`
token relative to the `no` token at the predictor's first output position:
p_yes = P(yes) / (P(yes) + P(no)). The few-shot prompt prepends retrieved
labeled examples; with no examples it collapses byte-for-byte to the
zero-shot prompt.
"""

import tempfile

from codequal import PromptTemplate, build_prompt
from codequal.estimators import score_with_context, score_zs
from codequal.gateway import BackendConfig, two_way_posterior
from codequal.retrieval import BalancedContext

template = PromptTemplate()
query = ("Write a function add(a, b) that returns the sum.",
         "def add(a, b):\n    return a + b\n")

zs_prompt = build_prompt(template, None, query)
print("---- zero-shot prompt ----")
print(zs_prompt)
print("--------------------------\n")

empty = BalancedContext(correct=(), incorrect=())
print("empty context renders the identical prompt:",
      build_prompt(template, empty, query) == zs_prompt)

# the posterior arithmetic itself
for lp_yes, lp_no in ((-0.1, -2.3), (-1.0, -1.0), (-5.0, -0.5)):
    print(f"logprob_yes={lp_yes:+.1f} logprob_no={lp_no:+.1f} "
          f"-> p_yes={two_way_posterior(lp_yes, lp_no):.4f}")

# scoring through a deterministic offline predictor
predictor = BackendConfig(role="predictor", endpoint="stub", model_name="demo-pred",
                          cache_dir=tempfile.mkdtemp(prefix="codequal-demo-"), seed=5)
zs = score_zs("demo-problem", "demo-solution", query, predictor)
fs_empty = score_with_context("demo-problem", "demo-solution", query, empty, predictor)
print(f"\nZS score:              {zs.score:.6f}")
print(f"FS with empty context: {fs_empty.score:.6f}  (identical: {zs.score == fs_empty.score})")
