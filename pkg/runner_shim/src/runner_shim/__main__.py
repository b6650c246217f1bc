"""Process entry point: one request on stdin, one response on stdout."""

from __future__ import annotations

import json
import sys

from . import VERDICT_ERROR, run_request


def main() -> int:
    raw = sys.stdin.read()
    try:
        request = json.loads(raw)
    except json.JSONDecodeError as exc:
        response = {"verdict": VERDICT_ERROR, "failed_case_index": None,
                    "message": f"malformed request: {exc.msg}"}
    else:
        response = run_request(request)
    sys.stdout.write(json.dumps(response) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
