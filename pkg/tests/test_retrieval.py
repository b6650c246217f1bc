import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from codequal.corpus import CandidateSolution, ProblemSpec
from codequal.executor import CorrectnessLabel
from codequal.retrieval import (
    ALPHA_PRESETS,
    EmbeddedExample,
    ExampleIndex,
    NeighborhoodConfig,
    RetrievalError,
    build_index,
    load_index,
    retrieve_balanced,
    save_index,
    sigma,
)

from conftest import unit


def make_example(eid, pvec, svec, label="pass"):
    return EmbeddedExample(
        example_id=eid, problem_id=f"p-{eid}", solution_id=f"s-{eid}",
        problem_vec=np.asarray(pvec, dtype=np.float64),
        solution_vec=np.asarray(svec, dtype=np.float64),
        label=label, problem_text=f"problem {eid}", solution_text=f"solution {eid}",
    )


def random_store(rng, n, dim, label):
    return [
        make_example(f"{label}-{i:04d}",
                     unit(rng.standard_normal(dim)), unit(rng.standard_normal(dim)),
                     label=label)
        for i in range(n)
    ]


def oracle_retrieve(index, qp, qs, alpha, k):
    """Exhaustive scan: per-example dot products, explicit tie rule."""
    out = {}
    for name, store in (("correct", index.correct_store),
                        ("incorrect", index.incorrect_store)):
        scored = [(float(alpha * np.dot(qp, ex.problem_vec)
                         + (1 - alpha) * np.dot(qs, ex.solution_vec)), ex.example_id)
                  for ex in store]
        scored.sort(key=lambda t: (-t[0], t[1]))
        out[name] = [eid for _, eid in scored]
    k_eff = min(k, len(out["correct"]), len(out["incorrect"]))
    return out["correct"][:k_eff], out["incorrect"][:k_eff]


class TestSigma:
    def test_direct_substitution(self):
        # problem dot = 0.8, solution dot = 0.4 by construction
        ex = make_example("e", [0.8, 0.6], [0.4, np.sqrt(1 - 0.16)])
        qp = np.array([1.0, 0.0])
        qs = np.array([1.0, 0.0])
        assert sigma(qp, qs, ex, 0.5) == pytest.approx(0.6, abs=1e-12)

    def test_alpha_one_equals_problem_dot(self):
        rng = np.random.default_rng(0)
        ex = make_example("e", unit(rng.standard_normal(8)), unit(rng.standard_normal(8)))
        qp, qs = unit(rng.standard_normal(8)), unit(rng.standard_normal(8))
        assert sigma(qp, qs, ex, 1.0) == pytest.approx(float(qp @ ex.problem_vec), abs=1e-15)

    def test_alpha_zero_self_dot_is_one(self):
        rng = np.random.default_rng(1)
        svec = unit(rng.standard_normal(8))
        ex = make_example("e", unit(rng.standard_normal(8)), svec)
        assert sigma(unit(rng.standard_normal(8)), svec, ex, 0.0) == pytest.approx(1.0)

    def test_range_bounded_for_unit_vectors(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            ex = make_example("e", unit(rng.standard_normal(6)), unit(rng.standard_normal(6)))
            value = sigma(unit(rng.standard_normal(6)), unit(rng.standard_normal(6)),
                          ex, rng.uniform())
            assert -1.0 - 1e-9 <= value <= 1.0 + 1e-9

    def test_dimension_mismatch(self):
        ex = make_example("e", [1.0, 0.0], [1.0, 0.0])
        with pytest.raises(RetrievalError):
            sigma(np.zeros(3), np.zeros(3), ex, 0.5)


class TestBuildIndex:
    def _triples(self, n_pass, n_fail, n_infra=0):
        triples = []
        verdicts = ["pass"] * n_pass + ["fail"] * n_fail + ["infra_error"] * n_infra
        for i, verdict in enumerate(verdicts):
            problem = ProblemSpec(id=f"p{i}", description=f"task number {i}")
            solution = CandidateSolution(problem_id=f"p{i}", solution_id="s",
                                         code=f"def f():\n    return {i}\n")
            triples.append((problem, solution,
                            CorrectnessLabel(problem_id=f"p{i}", solution_id="s",
                                             verdict=verdict)))
        return triples

    def test_partition_by_label(self, stub_encoder):
        index = build_index(self._triples(50, 50), stub_encoder)
        assert index.store_sizes() == (50, 50)

    def test_timeout_goes_incorrect(self, stub_encoder):
        triples = self._triples(1, 0)
        problem = ProblemSpec(id="pt", description="slow task")
        solution = CandidateSolution(problem_id="pt", solution_id="s", code="while 1: pass")
        triples.append((problem, solution,
                        CorrectnessLabel(problem_id="pt", solution_id="s", verdict="timeout")))
        index = build_index(triples, stub_encoder)
        assert index.store_sizes() == (1, 1)

    def test_infra_error_excluded(self, stub_encoder):
        index = build_index(self._triples(3, 3, n_infra=4), stub_encoder)
        assert index.store_sizes() == (3, 3)
        all_ids = {ex.example_id for ex in index.correct_store + index.incorrect_store}
        assert len(all_ids) == 6

    def test_rebuild_identical(self, stub_encoder):
        a = build_index(self._triples(4, 4), stub_encoder)
        b = build_index(self._triples(4, 4), stub_encoder)
        for store_a, store_b in ((a.correct_store, b.correct_store),
                                 (a.incorrect_store, b.incorrect_store)):
            assert [e.example_id for e in store_a] == [e.example_id for e in store_b]
            assert all(np.array_equal(x.problem_vec, y.problem_vec)
                       for x, y in zip(store_a, store_b))

    def test_empty_input_rejected(self, stub_encoder):
        with pytest.raises(RetrievalError):
            build_index([], stub_encoder)


class TestRetrieveBalanced:
    def _index(self, rng, n_correct, n_incorrect, dim=8):
        return ExampleIndex(
            random_store(rng, n_correct, dim, "pass"),
            random_store(rng, n_incorrect, dim, "incorrect"),
            encoder_tag="t", dim=dim,
        )

    def test_cardinality(self):
        rng = np.random.default_rng(0)
        index = self._index(rng, 5, 5)
        ctx = retrieve_balanced(unit(rng.standard_normal(8)), unit(rng.standard_normal(8)),
                                index, NeighborhoodConfig(k=2, alpha=0.5))
        assert len(ctx.correct) == len(ctx.incorrect) == 2

    def test_truncation_keeps_balance(self):
        rng = np.random.default_rng(1)
        index = self._index(rng, 3, 9)
        ctx = retrieve_balanced(unit(rng.standard_normal(8)), unit(rng.standard_normal(8)),
                                index, NeighborhoodConfig(k=7, alpha=0.5))
        assert len(ctx.correct) == len(ctx.incorrect) == 3

    def test_handset_vectors_match_oracle(self):
        # orthogonal/parallel problem vectors make the alpha=1 ranking exact
        e1 = np.array([1.0, 0.0, 0.0])
        e2 = np.array([0.0, 1.0, 0.0])
        e3 = np.array([0.0, 0.0, 1.0])
        mix = unit([1.0, 1.0, 0.0])
        correct = [make_example("c1", e1, e1, "pass"),
                   make_example("c2", e2, e2, "pass"),
                   make_example("c3", e3, e3, "pass")]
        incorrect = [make_example("i1", mix, e1, "incorrect"),
                     make_example("i2", e2, e2, "incorrect"),
                     make_example("i3", e3, e1, "incorrect")]
        index = ExampleIndex(correct, incorrect, encoder_tag="t", dim=3)
        qp, qs = e1, e3
        ctx = retrieve_balanced(qp, qs, index, NeighborhoodConfig(k=2, alpha=1.0))
        got = ([s.example.example_id for s in ctx.correct],
               [s.example.example_id for s in ctx.incorrect])
        assert got == oracle_retrieve(index, qp, qs, 1.0, 2)
        assert got == (["c1", "c2"], ["i1", "i2"])

    def test_ties_break_on_ascending_id(self):
        v = np.array([1.0, 0.0])
        correct = [make_example(eid, v, v, "pass") for eid in ("b", "a", "c")]
        incorrect = [make_example(eid, v, v, "incorrect") for eid in ("z", "y")]
        index = ExampleIndex(correct, incorrect, encoder_tag="t", dim=2)
        ctx = retrieve_balanced(v, v, index, NeighborhoodConfig(k=2, alpha=0.5))
        assert [s.example.example_id for s in ctx.correct] == ["a", "b"]
        assert [s.example.example_id for s in ctx.incorrect] == ["y", "z"]

    def test_empty_store_rejected(self):
        rng = np.random.default_rng(2)
        index = ExampleIndex(random_store(rng, 3, 8, "pass"), [], encoder_tag="t", dim=8)
        with pytest.raises(RetrievalError, match="nonempty"):
            retrieve_balanced(unit(rng.standard_normal(8)), unit(rng.standard_normal(8)),
                              index, NeighborhoodConfig(k=1, alpha=0.5))

    def test_dim_mismatch_rejected(self):
        rng = np.random.default_rng(3)
        index = self._index(rng, 2, 2, dim=8)
        with pytest.raises(RetrievalError, match="dim"):
            retrieve_balanced(unit(rng.standard_normal(16)), unit(rng.standard_normal(16)),
                              index, NeighborhoodConfig(k=1, alpha=0.5))

    def test_randomized_stores_match_oracle(self):
        rng = np.random.default_rng(7)
        for trial in range(20):
            dim = int(rng.integers(4, 32))
            index = self._index(rng, int(rng.integers(2, 40)), int(rng.integers(2, 40)), dim)
            qp, qs = unit(rng.standard_normal(dim)), unit(rng.standard_normal(dim))
            for alpha in (0.0, 0.5, 1.0):
                for k in (1, 3, 5):
                    ctx = retrieve_balanced(qp, qs, index,
                                            NeighborhoodConfig(k=k, alpha=alpha))
                    got = ([s.example.example_id for s in ctx.correct],
                           [s.example.example_id for s in ctx.incorrect])
                    assert got == oracle_retrieve(index, qp, qs, alpha, k)

    def test_alpha_one_ignores_solution_vectors(self):
        rng = np.random.default_rng(11)
        dim = 8
        correct = random_store(rng, 10, dim, "pass")
        incorrect = random_store(rng, 10, dim, "incorrect")
        index = ExampleIndex(correct, incorrect, encoder_tag="t", dim=dim)
        qp, qs = unit(rng.standard_normal(dim)), unit(rng.standard_normal(dim))
        base = retrieve_balanced(qp, qs, index, NeighborhoodConfig(k=4, alpha=1.0))
        scrambled = ExampleIndex(
            [make_example(e.example_id, e.problem_vec, unit(rng.standard_normal(dim)), "pass")
             for e in correct],
            [make_example(e.example_id, e.problem_vec, unit(rng.standard_normal(dim)),
                          "incorrect") for e in incorrect],
            encoder_tag="t", dim=dim,
        )
        after = retrieve_balanced(qp, unit(rng.standard_normal(dim)), scrambled,
                                  NeighborhoodConfig(k=4, alpha=1.0))
        assert ([s.example.example_id for s in base.correct]
                == [s.example.example_id for s in after.correct])
        assert ([s.example.example_id for s in base.incorrect]
                == [s.example.example_id for s in after.incorrect])

    @settings(max_examples=30, deadline=None)
    @given(n_correct=st.integers(1, 12), n_incorrect=st.integers(1, 12),
           k=st.integers(1, 6), alpha=st.floats(0, 1), seed=st.integers(0, 10_000))
    def test_balance_property(self, n_correct, n_incorrect, k, alpha, seed):
        rng = np.random.default_rng(seed)
        index = ExampleIndex(random_store(rng, n_correct, 6, "pass"),
                             random_store(rng, n_incorrect, 6, "incorrect"),
                             encoder_tag="t", dim=6)
        ctx = retrieve_balanced(unit(rng.standard_normal(6)), unit(rng.standard_normal(6)),
                                index, NeighborhoodConfig(k=k, alpha=alpha))
        assert len(ctx.correct) == len(ctx.incorrect) == min(k, n_correct, n_incorrect)
        labels = [s.example.label for s in ctx.interleaved()]
        assert labels == ["pass", "incorrect"] * (len(ctx) // 2)


class TestSigmaStability:
    def test_adding_examples_never_changes_existing_sigmas(self):
        rng = np.random.default_rng(13)
        examples = random_store(rng, 10, 8, "pass")
        qp, qs = unit(rng.standard_normal(8)), unit(rng.standard_normal(8))
        before = [sigma(qp, qs, ex, 0.5) for ex in examples]
        # sigma is pairwise: growing the store cannot move existing scores
        _ = random_store(rng, 50, 8, "pass")
        after = [sigma(qp, qs, ex, 0.5) for ex in examples]
        assert before == after


class TestPersistence:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        index = ExampleIndex(random_store(rng, 6, 8, "pass"),
                             random_store(rng, 4, 8, "incorrect"),
                             encoder_tag="enc-x", dim=8)
        save_index(index, tmp_path / "idx")
        loaded = load_index(tmp_path / "idx")
        assert loaded.encoder_tag == "enc-x"
        assert loaded.store_sizes() == (6, 4)
        qp, qs = unit(rng.standard_normal(8)), unit(rng.standard_normal(8))
        cfg = NeighborhoodConfig(k=3, alpha=0.5)
        before = retrieve_balanced(qp, qs, index, cfg)
        after = retrieve_balanced(qp, qs, loaded, cfg)
        assert ([s.example.example_id for s in before.interleaved()]
                == [s.example.example_id for s in after.interleaved()])
        for x, y in zip(before.interleaved(), after.interleaved()):
            assert x.sigma == pytest.approx(y.sigma, abs=1e-12)

    def test_save_deterministic(self, tmp_path):
        rng = np.random.default_rng(6)
        index = ExampleIndex(random_store(rng, 3, 4, "pass"),
                             random_store(rng, 3, 4, "incorrect"),
                             encoder_tag="e", dim=4)
        save_index(index, tmp_path / "a")
        save_index(index, tmp_path / "b")
        for name in ("manifest.json", "correct.jsonl", "incorrect.jsonl"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(RetrievalError, match="manifest"):
            load_index(tmp_path / "nothing")
