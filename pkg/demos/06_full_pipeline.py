"""The whole pipeline end to end, fully offline, through the CLI surface.

Stub backends make every stage deterministic: the generator emits marked
toy solutions, the marker runner labels them, the oracle predictor scores
them from ground truth, so the predictor-based methods reach nDCG 1.0.
Swap the backend endpoints for real OpenAI-compatible URLs (and the runner
for ["python", "-m", "runner_shim"]) to run the same config at scale.
"""

import tempfile
from pathlib import Path

import yaml

from codequal.cli import main as codequal_cli
from codequal.synthetic import make_problems, write_mbpp_style

workdir = Path(tempfile.mkdtemp(prefix="codequal-demo-"))
corpus_path = workdir / "mini.jsonl"
write_mbpp_style(corpus_path, *make_problems(20, seed=0))

config = {
    "seed": 7,
    "out_dir": str(workdir / "out"),
    "datasets": {
        "train": {"path": str(corpus_path), "format": "mbpp-style"},
        "tests": [{"name": "dev", "split": "dev"}],
    },
    "split": {"dev_fraction": 0.1},
    "backends": {
        "generator": {"endpoint": "stub", "model_name": "gen-stub"},
        "predictor": {"endpoint": "stub-oracle", "model_name": "pred-stub"},
        "encoder": {"endpoint": "stub", "model_name": "enc-stub"},
    },
    "generation": {"n": 10},
    "runners": {"python": "stub:marker"},
    "neighborhood": {"k_grid": [1, 2, 3, 4],
                     "alphas": {"FS-P": 1.0, "FS-S": 0.0, "FS-PS": 0.5}},
    "methods": ["ZS", "FS-P", "FS-S", "FS-PS", "ELS", "TLS"],
}
config_path = workdir / "config.yaml"
config_path.write_text(yaml.safe_dump(config))

for stage in ("ingest", "generate", "label", "index",
              "predict", "tune", "evaluate", "report"):
    code = codequal_cli(["--config", str(config_path), stage])
    assert code == 0, f"stage {stage} exited {code}"

print("\nfinal report:")
print((workdir / "out" / "report" / "report.csv").read_text())
print("tuning table:")
print((workdir / "out" / "report" / "tuning.csv").read_text())
print(f"artifacts under: {workdir / 'out'}")
