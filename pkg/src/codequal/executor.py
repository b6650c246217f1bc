"""Ground-truth labeling: run candidate solutions against their test suites.

Runners are pluggable per language tag and speak a one-shot JSON protocol:
request ``{"setup", "code", "tests", "timeout_s"}`` in, response
``{"verdict", "failed_case_index", "message"}`` out. Subprocess runners get
a fresh temp working directory per run and a host-side kill as the primary
timeout; in-process runners exist so tests and offline pipelines can stub
execution entirely.
"""

from __future__ import annotations

import json
import shutil
import subprocess
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Protocol, Sequence

from .corpus import CandidateSolution, ProblemSpec, TestSuite

VERDICTS = ("pass", "fail", "timeout", "infra_error")
WIRE_VERDICTS = ("pass", "fail", "timeout", "error")

# Error messages indicating the environment, not the candidate, is at fault.
_INFRA_ERROR_PATTERNS = ("ModuleNotFoundError", "No module named")


class ExecutorError(RuntimeError):
    pass


@dataclass(frozen=True)
class CorrectnessLabel:
    problem_id: str
    solution_id: str
    verdict: str  # pass | fail | timeout | infra_error
    detail: str | None = None
    duration: float = 0.0

    def __post_init__(self) -> None:
        if self.verdict not in VERDICTS:
            raise ExecutorError(f"invalid verdict {self.verdict!r}")

    @property
    def incorrect(self) -> bool:
        """fail and timeout both count as incorrect; infra_error counts as neither."""
        return self.verdict in ("fail", "timeout")


@dataclass(frozen=True)
class SandboxConfig:
    timeout_s: float = 10.0
    max_output_bytes: int = 65536
    network: bool = False
    max_parallel: int = 4
    grace_s: float = 2.0

    def __post_init__(self) -> None:
        if self.timeout_s <= 0:
            raise ExecutorError("timeout_s must be positive")
        if self.max_parallel < 1:
            raise ExecutorError("max_parallel must be >= 1")


class Runner(Protocol):
    """Anything that can answer one protocol request."""

    def run(self, request: dict, cfg: SandboxConfig) -> dict: ...


def build_request(
    problem: ProblemSpec, solution: CandidateSolution, suite: TestSuite, cfg: SandboxConfig
) -> dict:
    setup_parts = [s for s in (problem.setup_code, suite.setup_code) if s]
    return {
        "setup": "\n".join(setup_parts),
        "code": solution.code,
        "tests": list(suite.cases),
        "timeout_s": cfg.timeout_s,
    }


def _valid_response(response: object) -> bool:
    return (
        isinstance(response, dict)
        and response.get("verdict") in WIRE_VERDICTS
        and (response.get("failed_case_index") is None
             or isinstance(response.get("failed_case_index"), int))
        and isinstance(response.get("message", ""), str)
    )


class SubprocessRunner:
    """Spawns ``argv`` in a fresh temp dir and exchanges one request/response.

    The child is killed ``grace_s`` after the declared per-suite timeout;
    the temp working directory is always destroyed afterward.
    """

    def __init__(self, argv: Sequence[str]):
        if not argv:
            raise ExecutorError("runner argv must be nonempty")
        self.argv = list(argv)

    def run(self, request: dict, cfg: SandboxConfig) -> dict:
        workdir = tempfile.mkdtemp(prefix="codequal-sandbox-")
        try:
            proc = subprocess.Popen(
                self.argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                cwd=workdir,
                text=True,
            )
            try:
                out, err = proc.communicate(
                    input=json.dumps(request), timeout=request["timeout_s"] + cfg.grace_s
                )
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.communicate()
                return {"verdict": "timeout", "failed_case_index": None,
                        "message": "killed by host after timeout"}
            out = out[: cfg.max_output_bytes]
            try:
                response = json.loads(out)
            except json.JSONDecodeError:
                return {"verdict": "__protocol__", "failed_case_index": None,
                        "message": f"unparseable runner output (exit {proc.returncode}): "
                                   f"{out[:200]!r} stderr={err[:200]!r}"}
            if not _valid_response(response):
                return {"verdict": "__protocol__", "failed_case_index": None,
                        "message": f"malformed runner response: {out[:200]!r}"}
            if proc.returncode != 0:
                return {"verdict": "__protocol__", "failed_case_index": None,
                        "message": f"runner exited {proc.returncode} despite response"}
            return response
        finally:
            shutil.rmtree(workdir, ignore_errors=True)


class CallableRunner:
    """In-process runner wrapping ``fn(request) -> response``; used by stubs."""

    def __init__(self, fn: Callable[[dict], dict]):
        self.fn = fn

    def run(self, request: dict, cfg: SandboxConfig) -> dict:
        return self.fn(request)


def marker_stub_runner(pass_marker: str, fail_marker: str | None = None) -> CallableRunner:
    """Deterministic stub: verdict decided by a marker substring in the code.

    Code containing ``pass_marker`` passes; anything else fails (at case 0).
    Keeps offline pipeline runs fast and reproducible without executing
    candidate code.
    """

    def fn(request: dict) -> dict:
        if pass_marker in request["code"]:
            return {"verdict": "pass", "failed_case_index": None, "message": ""}
        return {"verdict": "fail", "failed_case_index": 0,
                "message": "marker stub: no pass marker present"}

    return CallableRunner(fn)


class RunnerRegistry:
    """Maps corpus language tags to runners; tags are opaque strings."""

    def __init__(self) -> None:
        self._runners: dict[str, Runner] = {}

    def register(self, language: str, runner: Runner) -> None:
        self._runners[language] = runner

    def get(self, language: str) -> Runner | None:
        return self._runners.get(language)


def _classify_wire_response(response: dict) -> tuple[str, str | None]:
    """Map a wire verdict onto a label verdict.

    Load-time errors are the candidate's fault (fail) unless the message
    indicates a missing module, which is an environment problem and must
    not pollute ground truth (infra_error).
    """
    verdict = response["verdict"]
    message = response.get("message") or ""
    idx = response.get("failed_case_index")
    if verdict == "pass":
        return "pass", None
    if verdict == "fail":
        detail = f"failed case {idx}" if idx is not None else "failed"
        return "fail", f"{detail}: {message}" if message else detail
    if verdict == "timeout":
        return "timeout", message or "timed out"
    if verdict == "error":
        if any(pat in message for pat in _INFRA_ERROR_PATTERNS):
            return "infra_error", f"environment-missing import: {message}"
        return "fail", f"load error: {message}"
    return "infra_error", f"runner protocol violation: {message}"


def label_solution(
    problem: ProblemSpec,
    solution: CandidateSolution,
    suite: TestSuite,
    cfg: SandboxConfig,
    runner: Runner | None,
) -> CorrectnessLabel:
    """Produce one correctness label; never raises for per-item failures."""
    start = time.monotonic()
    if runner is None:
        return CorrectnessLabel(
            problem_id=problem.id, solution_id=solution.solution_id,
            verdict="infra_error", detail=f"no runner for language {problem.language!r}",
        )
    request = build_request(problem, solution, suite, cfg)
    try:
        response = runner.run(request, cfg)
    except Exception as exc:
        return CorrectnessLabel(
            problem_id=problem.id, solution_id=solution.solution_id,
            verdict="infra_error", detail=f"runner crashed: {exc}",
            duration=time.monotonic() - start,
        )
    if not isinstance(response, dict) or "verdict" not in response:
        verdict, detail = "infra_error", "runner protocol violation: no verdict"
    else:
        verdict, detail = _classify_wire_response(response)
    return CorrectnessLabel(
        problem_id=problem.id, solution_id=solution.solution_id,
        verdict=verdict, detail=detail, duration=time.monotonic() - start,
    )


def label_corpus(
    problems: Mapping[str, ProblemSpec],
    suites: Mapping[str, TestSuite],
    solutions: Iterable[CandidateSolution],
    cfg: SandboxConfig,
    registry: RunnerRegistry,
) -> list[CorrectnessLabel]:
    """Label every solution, up to ``max_parallel`` sandboxes at a time.

    Per-item infra errors never abort the batch. Results are keyed and
    sorted by (problem_id, solution_id), so the output is independent of
    completion order and of the parallelism level.
    """
    items = list(solutions)

    def one(solution: CandidateSolution) -> CorrectnessLabel:
        problem = problems.get(solution.problem_id)
        if problem is None:
            return CorrectnessLabel(
                problem_id=solution.problem_id, solution_id=solution.solution_id,
                verdict="infra_error", detail="unknown problem_id",
            )
        suite = suites.get(solution.problem_id)
        if suite is None:
            return CorrectnessLabel(
                problem_id=solution.problem_id, solution_id=solution.solution_id,
                verdict="infra_error", detail="no test suite for problem",
            )
        return label_solution(problem, solution, suite, cfg, registry.get(problem.language))

    if cfg.max_parallel == 1 or len(items) <= 1:
        labels = [one(s) for s in items]
    else:
        with ThreadPoolExecutor(max_workers=cfg.max_parallel) as pool:
            labels = list(pool.map(one, items))
    return sorted(labels, key=lambda l: (l.problem_id, l.solution_id))


def pass_rate(labels: Sequence[CorrectnessLabel]) -> float:
    """Micro pass rate over non-infra labels: pass / (pass + fail + timeout)."""
    counted = [l for l in labels if l.verdict != "infra_error"]
    if not counted:
        raise ExecutorError("pass_rate undefined: all labels are infra_error")
    passed = sum(1 for l in counted if l.verdict == "pass")
    return passed / len(counted)
