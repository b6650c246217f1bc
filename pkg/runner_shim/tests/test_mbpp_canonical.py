"""Canonical solutions of an MBPP-style file must pass through the shim.

The fixture file is generated locally from small task templates whose
reference solutions are genuinely correct, so anything below a ~100% pass
rate indicates a shim defect. Missing-module errors count as environment
problems, not failures. Point MBPP_JSONL at a real file to run the same
check against it.
"""

import json
import os

import pytest

from runner_shim import run_request

TEMPLATES = [
    lambda c: {
        "text": f"Write a function to add {c} to a number.",
        "code": f"def add_{c}(x):\n    return x + {c}\n",
        "tests": [f"assert add_{c}(0) == {c}", f"assert add_{c}(5) == {5 + c}"],
    },
    lambda c: {
        "text": f"Write a function to multiply a number by {c}.",
        "code": f"def times_{c}(x):\n    return x * {c}\n",
        "tests": [f"assert times_{c}(3) == {3 * c}", f"assert times_{c}(0) == 0"],
    },
    lambda c: {
        "text": "Write a function to sum a list of numbers.",
        "code": "def total(xs):\n    return sum(xs)\n",
        "tests": [f"assert total([1, 2, {c}]) == {3 + c}", "assert total([]) == 0"],
    },
    lambda c: {
        "text": "Write a function to find the smallest element of a list.",
        "code": "def smallest(xs):\n    return min(xs)\n",
        "tests": [f"assert smallest([{c}, {c + 5}, {c + 1}]) == {c}"],
    },
    lambda c: {
        "text": "Write a function to check whether a number is even.",
        "code": "def is_even(x):\n    return x % 2 == 0\n",
        "tests": [f"assert is_even({2 * c}) == True", f"assert is_even({2 * c + 1}) == False"],
    },
    lambda c: {
        "text": "Write a function to compute the square root of a perfect square.",
        "code": "import math\ndef root(x):\n    return int(math.isqrt(x))\n",
        "tests": [f"assert root({c * c}) == {c}"],
    },
    lambda c: {
        "text": "Write a function to upper-case a string.",
        "code": "def shout(s):\n    return s.upper()\n",
        "tests": ["assert shout('abc') == 'ABC'"],
    },
    lambda c: {
        "text": "Write a function to count occurrences of a character.",
        "code": "def count_char(s, ch):\n    return s.count(ch)\n",
        "tests": [f"assert count_char('a' * {c} + 'b', 'a') == {c}"],
    },
    lambda c: {
        "text": "Write a function to sort a list ascending.",
        "code": "def ordered(xs):\n    return sorted(xs)\n",
        "tests": [f"assert ordered([{c}, 1, {c + 2}]) == sorted([{c}, 1, {c + 2}])"],
    },
    lambda c: {
        "text": f"Write a function that repeats a string {c} times.",
        "code": f"def repeat(s):\n    return s * {c}\n",
        "tests": [f"assert repeat('ab') == {'ab' * c!r}"],
    },
]


def write_fixture(path, n_records=100):
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(n_records):
            spec = TEMPLATES[i % len(TEMPLATES)](2 + i % 7)
            record = {
                "task_id": i + 1,
                "text": spec["text"],
                "code": spec["code"],
                "test_list": spec["tests"],
            }
            fh.write(json.dumps(record) + "\n")
    return path


def canonical_pass_rate(path) -> float:
    passed = counted = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            response = run_request({
                "setup": record.get("test_setup_code", ""),
                "code": record["code"],
                "tests": record["test_list"],
                "timeout_s": 10.0,
            })
            if (response["verdict"] == "error"
                    and "ModuleNotFoundError" in response["message"]):
                continue  # environment-missing import, not the shim's fault
            counted += 1
            if response["verdict"] == "pass":
                passed += 1
    assert counted > 0
    return passed / counted


def test_generated_fixture_canonicals_pass(tmp_path):
    path = write_fixture(tmp_path / "mbpp_style.jsonl")
    assert canonical_pass_rate(path) >= 0.99


@pytest.mark.skipif("MBPP_JSONL" not in os.environ,
                    reason="set MBPP_JSONL to check a real corpus file")
def test_real_mbpp_canonicals_pass():
    assert canonical_pass_rate(os.environ["MBPP_JSONL"]) >= 0.99
