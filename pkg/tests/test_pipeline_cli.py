import hashlib
import json
from pathlib import Path

import pytest
import yaml

import codequal.gateway as gw
from codequal import synthetic
from codequal.cli import main
from codequal.config import ConfigError, load_run_config, resolve_config
from codequal.pipeline import STAGES, Layout, MissingArtifactError, run_all, run_stage


def write_corpus(tmp_path, n_problems=12, seed=0):
    data_path = tmp_path / "corpus.jsonl"
    problems, suites, canonicals = synthetic.make_problems(n_problems, seed=seed)
    synthetic.write_mbpp_style(data_path, problems, suites, canonicals)
    return data_path


def make_config(tmp_path, *, n_problems=12, n_solutions=6, predictor="stub-oracle",
                k_grid=(1, 2), out_name="out", methods=None, audit=False):
    data_path = write_corpus(tmp_path, n_problems)
    raw = {
        "seed": 7,
        "out_dir": str(tmp_path / out_name),
        "datasets": {
            "train": {"path": str(data_path), "format": "mbpp-style"},
            "tests": [{"name": "dev", "split": "dev"}],
        },
        "split": {"dev_fraction": 0.2},
        "backends": {
            "generator": {"endpoint": "stub", "model_name": "gen-stub"},
            "predictor": {"endpoint": predictor, "model_name": "pred-stub"},
            "encoder": {"endpoint": "stub", "model_name": "enc-stub"},
        },
        "generation": {"n": n_solutions, "temperature": 0.5, "max_tokens": 256},
        "runners": {"python": "stub:marker"},
        "neighborhood": {"k_grid": list(k_grid),
                         "alphas": {"FS-P": 1.0, "FS-S": 0.0, "FS-PS": 0.5}},
        "methods": methods or ["ZS", "FS-P", "FS-S", "FS-PS", "ELS", "TLS"],
        "prompt": {"audit": audit},
    }
    config_path = tmp_path / "config.yaml"
    config_path.write_text(yaml.safe_dump(raw))
    return config_path, raw


def tree_hashes(root: Path) -> dict[str, str]:
    return {
        str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


class TestConfig:
    def test_resolve_and_hash_stable(self, tmp_path):
        config_path, raw = make_config(tmp_path)
        a = load_run_config(config_path)
        b = load_run_config(config_path)
        assert a.config_hash == b.config_hash
        assert a.methods == ("ZS", "FS-P", "FS-S", "FS-PS", "ELS", "TLS")

    def test_missing_backend_is_config_error(self, tmp_path):
        config_path, raw = make_config(tmp_path)
        del raw["backends"]["predictor"]
        config_path.write_text(yaml.safe_dump(raw))
        with pytest.raises(ConfigError, match="backends.predictor"):
            load_run_config(config_path)

    def test_missing_dataset_file(self, tmp_path):
        config_path, raw = make_config(tmp_path)
        raw["datasets"]["train"]["path"] = str(tmp_path / "gone.jsonl")
        config_path.write_text(yaml.safe_dump(raw))
        with pytest.raises(ConfigError, match="not found"):
            load_run_config(config_path)

    def test_set_override_changes_hash(self, tmp_path):
        config_path, _ = make_config(tmp_path)
        base = load_run_config(config_path)
        bumped = load_run_config(config_path, overrides=["generation.n=9"])
        assert bumped.generation.n == 9
        assert bumped.config_hash != base.config_hash

    def test_bad_override_syntax(self, tmp_path):
        config_path, _ = make_config(tmp_path)
        with pytest.raises(ConfigError, match="key=value"):
            load_run_config(config_path, overrides=["generation.n"])

    def test_file_backed_test_cannot_be_named_dev(self, tmp_path):
        config_path, raw = make_config(tmp_path)
        raw["datasets"]["tests"] = [
            {"name": "dev", "path": raw["datasets"]["train"]["path"],
             "format": "mbpp-style"},
        ]
        config_path.write_text(yaml.safe_dump(raw))
        with pytest.raises(ConfigError, match="reserved"):
            load_run_config(config_path)


class TestStages:
    def test_full_run_produces_report(self, tmp_path):
        config_path, raw = make_config(tmp_path)
        cfg = load_run_config(config_path)
        run_all(cfg)
        layout = Layout(cfg.out_dir)
        report = (layout.report_dir / "report.csv").read_text()
        assert report.splitlines()[0].startswith("method,test_set,scope")
        for method in ("ZS", "FS-P", "FS-S", "FS-PS", "ELS", "TLS"):
            assert f"\n{method}," in report or report.startswith(f"{method},")
        for stage in STAGES:
            assert layout.manifest(stage).is_file()

    def test_oracle_predictor_reaches_perfect_ndcg(self, tmp_path):
        config_path, _ = make_config(tmp_path)
        cfg = load_run_config(config_path)
        run_all(cfg)
        rows = [json.loads(line) for line in
                (Layout(cfg.out_dir).report_dir / "report.jsonl").read_text().splitlines()]
        cells = [r for r in rows if r["kind"] == "cell"
                 and r["method"] in ("ZS", "FS-P", "FS-S", "FS-PS")]
        assert cells
        assert all(r["value"] == 1.0 for r in cells)

    def test_stage_missing_upstream(self, tmp_path):
        config_path, _ = make_config(tmp_path)
        cfg = load_run_config(config_path)
        with pytest.raises(MissingArtifactError, match="ingest"):
            run_stage("generate", cfg)

    def test_predict_without_index_names_stage(self, tmp_path):
        config_path, _ = make_config(tmp_path)
        cfg = load_run_config(config_path)
        for stage in ("ingest", "generate", "label"):
            run_stage(stage, cfg)
        with pytest.raises(MissingArtifactError, match="index"):
            run_stage("predict", cfg)

    def test_rerun_is_byte_identical(self, tmp_path):
        config_path, _ = make_config(tmp_path, n_problems=10, n_solutions=5)
        cfg = load_run_config(config_path)
        run_all(cfg)
        first = tree_hashes(cfg.out_dir)
        run_all(cfg)
        assert tree_hashes(cfg.out_dir) == first

    def test_evaluate_rerun_identical_report(self, tmp_path):
        config_path, _ = make_config(tmp_path, n_problems=10, n_solutions=5)
        cfg = load_run_config(config_path)
        run_all(cfg)
        layout = Layout(cfg.out_dir)
        before = (layout.eval_dir / "report.csv").read_bytes()
        run_stage("evaluate", cfg)
        assert (layout.eval_dir / "report.csv").read_bytes() == before

    def test_mixed_provenance_refused(self, tmp_path):
        config_path, _ = make_config(tmp_path, n_problems=10, n_solutions=5)
        cfg = load_run_config(config_path)
        run_all(cfg)
        # rebuild ingest under a different seed: the chain is now stale
        stale = load_run_config(config_path, seed_override=99)
        run_stage("ingest", stale)
        from codequal.pipeline import ProvenanceError
        with pytest.raises(ProvenanceError):
            run_stage("report", cfg)

    def test_prompt_audit_writes_prompts(self, tmp_path):
        config_path, _ = make_config(tmp_path, n_problems=10, n_solutions=4,
                                     methods=["ZS"], audit=True)
        cfg = load_run_config(config_path)
        for stage in ("ingest", "generate", "label", "index", "predict"):
            run_stage(stage, cfg)
        prompts = list((Path(cfg.out_dir) / "prompts").rglob("*.txt"))
        assert prompts
        text = prompts[0].read_text()
        assert text.endswith("Answer:")

    def test_index_uses_train_split_only(self, tmp_path):
        config_path, _ = make_config(tmp_path, n_problems=10, n_solutions=4)
        cfg = load_run_config(config_path)
        for stage in ("ingest", "generate", "label", "index"):
            run_stage(stage, cfg)
        layout = Layout(cfg.out_dir)
        split = json.loads(layout.split_file.read_text())
        dev_ids = set(split["dev"])
        assert dev_ids
        for store in ("correct.jsonl", "incorrect.jsonl"):
            for line in (layout.index_dir / store).read_text().splitlines():
                assert json.loads(line)["problem_id"] not in dev_ids


def write_humaneval_style(path, n=6):
    records = []
    for i in range(n):
        entry = f"he_func_{i}"
        records.append({
            "task_id": f"HE/{i}",
            "prompt": f'def {entry}(x):\n    """Return x plus {i}."""\n',
            "canonical_solution": f"    return x + {i}\n",
            "test": f"def check(candidate):\n    assert candidate(0) == {i}\n",
            "entry_point": entry,
        })
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


class TestExternalTestSet:
    def test_humaneval_style_test_corpus_evaluated(self, tmp_path):
        config_path, raw = make_config(tmp_path, n_problems=10, n_solutions=4)
        he_path = tmp_path / "he.jsonl"
        write_humaneval_style(he_path)
        raw["datasets"]["tests"].append(
            {"name": "he", "path": str(he_path), "format": "humaneval-style"}
        )
        config_path.write_text(yaml.safe_dump(raw))
        cfg = load_run_config(config_path)
        run_all(cfg)
        layout = Layout(cfg.out_dir)
        assert layout.generated_file("he").is_file()
        assert layout.labels_file("he").is_file()
        report = (layout.report_dir / "report.csv").read_text()
        test_sets = {line.split(",")[1] for line in report.splitlines()[1:]}
        assert test_sets == {"dev", "he"}
        # dual-provenance scores exist for the external set too
        assert layout.scores_file("he", "ZS", None).is_file()
        assert layout.scores_file("he", "FS-PS", 2).is_file()


class TestCli:
    def run_cli(self, config_path, stage, *extra):
        return main(["--config", str(config_path), stage, *extra])

    def test_stage_by_stage_exit_zero(self, tmp_path, capsys):
        config_path, _ = make_config(tmp_path, n_problems=10, n_solutions=4)
        for stage in STAGES:
            assert self.run_cli(config_path, stage) == 0
        out = capsys.readouterr().out
        assert "report: ok" in out

    def test_missing_artifact_exit_3(self, tmp_path, capsys):
        config_path, _ = make_config(tmp_path)
        assert self.run_cli(config_path, "predict") == 3
        assert "ingest" in capsys.readouterr().err

    def test_config_error_exit_2(self, tmp_path, capsys):
        config_path, raw = make_config(tmp_path)
        raw["split"]["dev_fraction"] = 3.0
        config_path.write_text(yaml.safe_dump(raw))
        assert self.run_cli(config_path, "ingest") == 2
        assert "dev_fraction" in capsys.readouterr().err

    def test_backend_failure_exit_4(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setattr(gw, "_RETRY_BACKOFF_S", 0.0)
        config_path, raw = make_config(tmp_path, n_problems=10, n_solutions=4)
        for stage in ("ingest", "generate", "label", "index"):
            assert self.run_cli(config_path, stage) == 0
        raw["backends"]["predictor"] = {
            "endpoint": "http://127.0.0.1:9/v1", "model_name": "down",
        }
        config_path.write_text(yaml.safe_dump(raw))
        # config changed, so rebuild the chain up to predict under the new config
        for stage in ("ingest", "generate", "label", "index"):
            assert self.run_cli(config_path, stage) == 0
        assert self.run_cli(config_path, "predict") == 4
        assert "127.0.0.1:9" in capsys.readouterr().err

    def test_set_override_round_trips(self, tmp_path):
        config_path, _ = make_config(tmp_path, n_problems=10, n_solutions=4)
        assert self.run_cli(config_path, "ingest", "--set", "split.dev_fraction=0.5") == 0
        cfg = load_run_config(config_path, overrides=["split.dev_fraction=0.5"])
        split = json.loads(Layout(cfg.out_dir).split_file.read_text())
        assert len(split["dev"]) == 5
