"""Label candidate solutions by running their test suites in sandboxes.

Uses the runner-shim package over the subprocess protocol when installed;
otherwise falls back to the in-process marker stub.
"""

import importlib.util
import sys

from codequal import RunnerRegistry, SandboxConfig, label_corpus, pass_rate
from codequal.executor import SubprocessRunner, marker_stub_runner
from codequal.gateway import STUB_PASS_MARKER
from codequal.synthetic import make_problems, make_solutions

problems, suites, _ = make_problems(6, seed=1)
solutions = []
for problem in problems:
    solutions.extend(make_solutions(problem, n=5, seed=1))

registry = RunnerRegistry()
if importlib.util.find_spec("runner_shim") is not None:
    print("using the real runner shim (subprocess, JSON protocol)")
    registry.register("python", SubprocessRunner([sys.executable, "-m", "runner_shim"]))
else:
    print("runner-shim not installed, using the marker stub runner")
    registry.register("python", marker_stub_runner(STUB_PASS_MARKER))

cfg = SandboxConfig(timeout_s=5.0, max_parallel=4)
labels = label_corpus({p.id: p for p in problems},
                      {s.problem_id: s for s in suites},
                      solutions, cfg, registry)

for label in labels[:8]:
    print(f"  {label.problem_id}/{label.solution_id}: {label.verdict}"
          + (f"  ({label.detail})" if label.detail else ""))
print(f"... {len(labels)} labels total")
print(f"pass rate: {pass_rate(labels):.3f}")
