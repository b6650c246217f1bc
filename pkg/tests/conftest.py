import numpy as np
import pytest

from codequal.corpus import CandidateSolution, ProblemSpec
from codequal.corpus import TestSuite as Suite
from codequal.gateway import BackendConfig


@pytest.fixture
def toy_corpus():
    problems = [
        ProblemSpec(id="p1", description="Write a function add(a, b) returning a + b.",
                    entry_point="add"),
        ProblemSpec(id="p2", description="Write a function neg(x) returning -x.",
                    entry_point="neg"),
    ]
    suites = [
        Suite(problem_id="p1", cases=("assert add(1, 2) == 3", "assert add(0, 0) == 0")),
        Suite(problem_id="p2", cases=("assert neg(4) == -4",)),
    ]
    solutions = [
        CandidateSolution(problem_id="p1", solution_id="good",
                          code="def add(a, b):\n    return a + b\n"),
        CandidateSolution(problem_id="p1", solution_id="bad",
                          code="def add(a, b):\n    return a - b\n"),
        CandidateSolution(problem_id="p2", solution_id="good",
                          code="def neg(x):\n    return -x\n"),
    ]
    return problems, suites, solutions


@pytest.fixture
def stub_encoder(tmp_path):
    return BackendConfig(role="encoder", endpoint="stub", model_name="enc-test",
                         cache_dir=tmp_path / "enc-cache", seed=11)


@pytest.fixture
def stub_predictor(tmp_path):
    return BackendConfig(role="predictor", endpoint="stub", model_name="pred-test",
                         cache_dir=tmp_path / "pred-cache", seed=11)


@pytest.fixture
def oracle_predictor(tmp_path):
    return BackendConfig(role="predictor", endpoint="stub-oracle", model_name="oracle-test",
                         cache_dir=tmp_path / "oracle-cache", seed=11)


@pytest.fixture
def stub_generator(tmp_path):
    return BackendConfig(role="generator", endpoint="stub", model_name="gen-test",
                         cache_dir=tmp_path / "gen-cache", seed=11)


def unit(vec) -> np.ndarray:
    arr = np.asarray(vec, dtype=np.float64)
    return arr / np.linalg.norm(arr)
