"""Dual correct/incorrect indexes and alpha-weighted balanced retrieval.

The similarity between a query pair and a stored example is

    sigma = alpha * <problem vectors> + (1 - alpha) * <solution vectors>

alpha=1 looks only at problems, alpha=0 only at solutions, alpha=0.5 mixes
both. Retrieval takes the top-k examples from EACH store, so the few-shot
context always shows the predictor as many correct as incorrect examples.
"""

import tempfile

from codequal import BackendConfig, NeighborhoodConfig, build_index, retrieve_balanced
from codequal.executor import CorrectnessLabel
from codequal.gateway import embed
from codequal.synthetic import make_problems, make_solutions

encoder = BackendConfig(role="encoder", endpoint="stub", model_name="demo-encoder",
                        cache_dir=tempfile.mkdtemp(prefix="codequal-demo-cache-"))

problems, suites, _ = make_problems(12, seed=3)
triples = []
for problem in problems:
    for solution in make_solutions(problem, n=4, seed=3):
        # pretend these labels came from the executor
        from codequal.gateway import STUB_PASS_MARKER
        verdict = "pass" if STUB_PASS_MARKER in solution.code else "fail"
        triples.append((problem, solution,
                        CorrectnessLabel(problem_id=problem.id,
                                         solution_id=solution.solution_id,
                                         verdict=verdict)))

index = build_index(triples, encoder)
n_correct, n_incorrect = index.store_sizes()
print(f"index: {n_correct} correct / {n_incorrect} incorrect examples, dim {index.dim}")

query_problem = "Write a function shift_0(x) that returns x plus 30."
query_solution = "def shift_0(x):\n    return x + 30\n"
qp = embed(query_problem, "pooled", encoder)
qs = embed(query_solution, "pooled", encoder)

for alpha, name in ((1.0, "FS-P: problems only"),
                    (0.0, "FS-S: solutions only"),
                    (0.5, "FS-PS: both fields")):
    ctx = retrieve_balanced(qp, qs, index, NeighborhoodConfig(k=2, alpha=alpha))
    print(f"\nalpha={alpha}  ({name})")
    for scored in ctx.interleaved():
        ex = scored.example
        print(f"  sigma={scored.sigma:+.4f}  [{ex.label:9s}] {ex.example_id}")
