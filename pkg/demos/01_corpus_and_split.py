"""Load a benchmark corpus, validate it, and cut a seeded train/dev split."""

import tempfile
from pathlib import Path

from codequal import load_dataset, split_train_dev, validate_corpus
from codequal.synthetic import make_problems, write_mbpp_style

workdir = Path(tempfile.mkdtemp(prefix="codequal-demo-"))

# A toy stand-in for an MBPP-style file: one JSON record per line with
# task_id / text / code / test_list fields.
corpus_path = workdir / "toy_corpus.jsonl"
write_mbpp_style(corpus_path, *make_problems(974, seed=0))
print(f"wrote {corpus_path}")

problems, suites, canonicals = load_dataset(corpus_path, "mbpp-style")
print(f"loaded {len(problems)} problems, {len(suites)} suites, "
      f"{len(canonicals)} canonical solutions")

report = validate_corpus(problems, suites, canonicals)
print(f"validation ok: {report.ok}")

# 90/10 split, reproducible from the seed
split = split_train_dev(problems, dev_fraction=0.10, seed=7)
print(f"train problems: {len(split.train)}")
print(f"dev problems:   {len(split.dev)}")
print(f"first dev ids:  {list(split.dev[:5])}")

again = split_train_dev(problems, dev_fraction=0.10, seed=7)
print(f"same seed gives the same split: {split == again}")
