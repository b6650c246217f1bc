"""Global vs local nDCG, and tuning k on a dev set.

An estimator is good when correct solutions rank above incorrect ones.
Globally, every (problem, solution) pair competes in one list; locally,
each problem's own solutions are ranked and the per-problem nDCG values
are averaged (problems whose solutions are all correct or all incorrect
carry no ranking signal and are excluded).
"""

from codequal.estimators import QualityScore
from codequal.evaluation import global_ndcg, local_ndcg, ndcg, tune_k

print("nDCG of gold sequences read off a ranking:")
for golds in ([1, 1, 0], [0, 1], [0, 1, 1], [1, 0, 1, 0]):
    print(f"  {golds} -> {ndcg(golds):.4f}")


def scores_from(ranking):  # ranking: (pid, sid, score)
    return [QualityScore(problem_id=p, solution_id=s, method="ZS", score=v)
            for p, s, v in ranking]


gold = {("a", "s1"): 1, ("a", "s2"): 0, ("b", "s1"): 0, ("b", "s2"): 1}
scores = scores_from([("a", "s1", 0.9), ("a", "s2", 0.4),
                      ("b", "s1", 0.8), ("b", "s2", 0.3)])
print(f"\nglobal nDCG: {global_ndcg(scores, gold):.4f}")
local = local_ndcg(scores, gold)
print(f"local nDCG:  {local.value:.4f}  "
      f"({local.n_problems} problems, {local.n_excluded} excluded)")

# dev-set tuning: pick the k with the best dev global nDCG, smallest on ties
dev_gold = {("p", f"s{i}"): (1 if i < 2 else 0) for i in range(4)}
by_k = {
    1: scores_from([("p", "s0", 0.9), ("p", "s2", 0.8), ("p", "s1", 0.7), ("p", "s3", 0.1)]),
    2: scores_from([("p", "s0", 0.9), ("p", "s1", 0.8), ("p", "s2", 0.2), ("p", "s3", 0.1)]),
    3: scores_from([("p", "s2", 0.9), ("p", "s0", 0.8), ("p", "s1", 0.7), ("p", "s3", 0.1)]),
}
result = tune_k(by_k, dev_gold)
print("\ntuning table (k -> dev G-nDCG):")
for k, value in result.table:
    print(f"  k={k}: {value:.4f}")
print(f"chosen k = {result.chosen_k}")
