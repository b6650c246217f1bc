"""One-shot test runner: assemble setup + candidate code + assertion cases
in an isolated namespace, execute under a watchdog, report a structured
verdict.

Protocol (one JSON document each way, over stdin/stdout):

    request:  {"setup": str, "code": str, "tests": [str], "timeout_s": number}
    response: {"verdict": "pass"|"fail"|"timeout"|"error",
               "failed_case_index": int|null, "message": str}

Cases run in listed order; the first failing case short-circuits with its
index. The in-process watchdog backstops the host-side kill, so a verdict
is emitted even for runaway candidate code (pure-Python loops; blocking C
calls remain the host's job). Candidate stdout/stderr are captured and
truncated so they can never pollute the protocol channel.
"""

from __future__ import annotations

import io
import signal
import sys

VERDICT_PASS = "pass"
VERDICT_FAIL = "fail"
VERDICT_TIMEOUT = "timeout"
VERDICT_ERROR = "error"

MAX_CAPTURED_OUTPUT = 65536
MAX_MESSAGE_CHARS = 512


class _WatchdogTimeout(BaseException):
    """Raised by the alarm handler; BaseException so candidate `except
    Exception` blocks cannot swallow it."""


def _raise_timeout(signum, frame):
    raise _WatchdogTimeout()


class _CappedWriter(io.TextIOBase):
    def __init__(self, limit: int):
        self._buffer = io.StringIO()
        self._limit = limit
        self._written = 0

    def write(self, s: str) -> int:
        room = self._limit - self._written
        if room > 0:
            self._buffer.write(s[:room])
        self._written += len(s)
        return len(s)

    def writable(self) -> bool:
        return True


def _describe(exc: BaseException) -> str:
    text = f"{type(exc).__name__}: {exc}"
    return text[:MAX_MESSAGE_CHARS]


def _response(verdict: str, index: int | None = None, message: str = "") -> dict:
    return {"verdict": verdict, "failed_case_index": index, "message": message}


def _validate(request: object) -> str | None:
    if not isinstance(request, dict):
        return "request must be a JSON object"
    if not isinstance(request.get("code"), str):
        return "request.code must be a string"
    tests = request.get("tests")
    if not isinstance(tests, list) or not all(isinstance(t, str) for t in tests):
        return "request.tests must be a list of strings"
    if not isinstance(request.get("timeout_s"), (int, float)):
        return "request.timeout_s must be a number"
    setup = request.get("setup", "")
    if setup is not None and not isinstance(setup, str):
        return "request.setup must be a string when present"
    return None


def run_request(request: dict) -> dict:
    """Execute one request; always returns a well-formed response document."""
    problem = _validate(request)
    if problem is not None:
        return _response(VERDICT_ERROR, message=f"malformed request: {problem}")
    setup = request.get("setup") or ""
    code = request["code"]
    tests = request["tests"]
    timeout_s = float(request["timeout_s"])
    if timeout_s <= 0:
        return _response(VERDICT_ERROR, message="malformed request: timeout_s must be > 0")

    namespace: dict = {"__name__": "__candidate__"}
    # reporting state captured before any candidate code runs
    real_stdout, real_stderr = sys.stdout, sys.stderr
    capture = _CappedWriter(MAX_CAPTURED_OUTPUT)
    previous_handler = signal.signal(signal.SIGALRM, _raise_timeout)
    signal.setitimer(signal.ITIMER_REAL, timeout_s)
    current_case: int | None = None
    try:
        sys.stdout = capture
        sys.stderr = capture
        try:
            exec(compile(setup, "<setup>", "exec"), namespace)
            exec(compile(code, "<candidate>", "exec"), namespace)
        except _WatchdogTimeout:
            raise
        except BaseException as exc:
            return _response(VERDICT_ERROR, message=_describe(exc))
        for index, case in enumerate(tests):
            current_case = index
            try:
                exec(compile(case, f"<case {index}>", "exec"), namespace)
            except _WatchdogTimeout:
                raise
            except BaseException as exc:
                return _response(VERDICT_FAIL, index=index, message=_describe(exc))
        return _response(VERDICT_PASS)
    except _WatchdogTimeout:
        return _response(VERDICT_TIMEOUT, index=current_case,
                         message=f"exceeded {timeout_s}s budget")
    finally:
        signal.setitimer(signal.ITIMER_REAL, 0.0)
        signal.signal(signal.SIGALRM, previous_handler)
        sys.stdout = real_stdout
        sys.stderr = real_stderr
