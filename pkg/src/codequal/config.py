"""Declarative run configuration: one YAML file drives the whole pipeline.

Every knob lives here so the four evaluation settings (which generator,
which predictor, which language/corpus) differ only in config fields.
``--set key=value`` overrides use dotted paths into the YAML structure.
All randomness, including stub backends and the train/dev split, derives
from the single root ``seed``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import yaml

from .estimators import ALL_METHODS
from .executor import SandboxConfig
from .gateway import BackendConfig, GenerationConfig
from .retrieval import ALPHA_PRESETS


class ConfigError(ValueError):
    """Invalid or missing configuration; message carries the field path."""


@dataclass(frozen=True)
class DatasetRef:
    name: str
    path: str | None = None       # file-backed test set (or the train corpus)
    format: str | None = None     # mbpp-style | humaneval-style
    split: str | None = None      # "dev" draws from the train corpus dev split


@dataclass(frozen=True)
class RunConfig:
    seed: int
    out_dir: Path
    train: DatasetRef
    tests: tuple[DatasetRef, ...]
    dev_fraction: float
    backends: dict[str, BackendConfig]      # generator | predictor | encoder
    generation: GenerationConfig
    sandbox: SandboxConfig
    runners: dict[str, Any]                 # language -> argv list or "stub:marker"
    k_grid: tuple[int, ...]
    alphas: dict[str, float]                # FS method name -> alpha
    methods: tuple[str, ...]
    prompt_max_chars: int | None
    prompt_audit: bool
    raw: dict = field(repr=False, default_factory=dict)

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.raw, sort_keys=True, separators=(",", ":")).encode("utf-8")
        ).hexdigest()


def load_config_file(path: str | Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file is not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    return data


def apply_overrides(data: dict, overrides: Sequence[str]) -> dict:
    """Apply ``a.b.c=value`` overrides; values parse as YAML scalars."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, _, raw_value = item.partition("=")
        try:
            value = yaml.safe_load(raw_value)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{key}: unparseable override value {raw_value!r}") from exc
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            nxt = node.get(part)
            if not isinstance(nxt, dict):
                nxt = {}
                node[part] = nxt
            node = nxt
        node[parts[-1]] = value
    return data


def _get(data: Mapping, path: str, default=None, required=False):
    node: Any = data
    for part in path.split("."):
        if not isinstance(node, Mapping) or part not in node:
            if required:
                raise ConfigError(f"{path}: required field missing")
            return default
        node = node[part]
    return node


def _backend(data: Mapping, role: str, root_seed: int, out_dir: Path) -> BackendConfig:
    section = _get(data, f"backends.{role}", required=True)
    if not isinstance(section, Mapping):
        raise ConfigError(f"backends.{role}: must be a mapping")
    endpoint = section.get("endpoint")
    if not endpoint:
        raise ConfigError(f"backends.{role}.endpoint: required field missing")
    cache = section.get("cache_dir")
    if cache is None:
        cache = str(out_dir / "cache" / role)
    return BackendConfig(
        role=role,
        endpoint=str(endpoint),
        model_name=str(section.get("model_name", f"{role}-model")),
        max_parallel=int(section.get("max_parallel", 4)),
        cache_dir=cache,
        seed=int(section.get("seed", root_seed)),
        api_key=section.get("api_key"),
    )


def _dataset_ref(node: Mapping, where: str, default_name: str | None = None) -> DatasetRef:
    if not isinstance(node, Mapping):
        raise ConfigError(f"{where}: must be a mapping")
    name = str(node.get("name", default_name or ""))
    split = node.get("split")
    path = node.get("path")
    if split is None and path is None:
        raise ConfigError(f"{where}: needs either path or split")
    if split is not None and split != "dev":
        raise ConfigError(f"{where}.split: only 'dev' is supported, got {split!r}")
    if path is not None:
        fmt = node.get("format")
        if fmt not in ("mbpp-style", "humaneval-style"):
            raise ConfigError(f"{where}.format: must be mbpp-style or humaneval-style")
        if not Path(path).is_file():
            raise ConfigError(f"{where}.path: file not found: {path}")
        return DatasetRef(name=name or Path(path).stem, path=str(path), format=fmt)
    return DatasetRef(name=name or "dev", split="dev")


def resolve_config(data: dict, out_dir_override: str | None = None,
                   seed_override: int | None = None) -> RunConfig:
    """Validate the raw mapping and produce an immutable RunConfig."""
    data = dict(data)
    if seed_override is not None:
        data["seed"] = seed_override
    if out_dir_override is not None:
        data["out_dir"] = out_dir_override
    seed = data.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed: must be an integer")
    out_dir = data.get("out_dir")
    if not out_dir:
        raise ConfigError("out_dir: required field missing")
    out_dir = Path(out_dir)

    train_node = _get(data, "datasets.train", required=True)
    train = _dataset_ref(train_node, "datasets.train", default_name="train")
    if train.path is None:
        raise ConfigError("datasets.train: must be file-backed (path + format)")
    tests_node = _get(data, "datasets.tests", default=[{"name": "dev", "split": "dev"}])
    if not isinstance(tests_node, list) or not tests_node:
        raise ConfigError("datasets.tests: must be a nonempty list")
    tests = tuple(
        _dataset_ref(t, f"datasets.tests[{i}]") for i, t in enumerate(tests_node)
    )
    names = [t.name for t in tests]
    if len(set(names)) != len(names):
        raise ConfigError("datasets.tests: duplicate test set names")
    for t in tests:
        if t.path is not None and t.name == "dev":
            raise ConfigError(
                "datasets.tests: the name 'dev' is reserved for the train-corpus dev split"
            )

    dev_fraction = float(_get(data, "split.dev_fraction", default=0.1))
    if not 0 < dev_fraction < 1:
        raise ConfigError("split.dev_fraction: must be in (0, 1)")

    backends = {role: _backend(data, role, seed, out_dir)
                for role in ("generator", "predictor", "encoder")}

    gen_node = data.get("generation", {})
    try:
        generation = GenerationConfig(
            n=int(gen_node.get("n", 10)),
            temperature=float(gen_node.get("temperature", 0.8)),
            max_tokens=int(gen_node.get("max_tokens", 512)),
            seed=seed if gen_node.get("seed") is None else int(gen_node["seed"]),
        )
    except Exception as exc:
        raise ConfigError(f"generation: {exc}") from exc

    sandbox_node = data.get("sandbox", {})
    try:
        sandbox = SandboxConfig(
            timeout_s=float(sandbox_node.get("timeout_s", 10.0)),
            max_output_bytes=int(sandbox_node.get("max_output_bytes", 65536)),
            network=bool(sandbox_node.get("network", False)),
            max_parallel=int(sandbox_node.get("max_parallel", 4)),
        )
    except Exception as exc:
        raise ConfigError(f"sandbox: {exc}") from exc

    runners = data.get("runners", {"python": "stub:marker"})
    if not isinstance(runners, dict) or not runners:
        raise ConfigError("runners: must be a nonempty mapping of language -> runner")
    for lang, spec in runners.items():
        ok = spec == "stub:marker" or (
            isinstance(spec, list) and spec and all(isinstance(x, str) for x in spec)
        )
        if not ok:
            raise ConfigError(
                f"runners.{lang}: must be 'stub:marker' or a nonempty argv list"
            )

    k_grid_node = _get(data, "neighborhood.k_grid", default=[1, 2, 3, 4, 5])
    if (not isinstance(k_grid_node, list) or not k_grid_node
            or any(not isinstance(k, int) or k < 1 for k in k_grid_node)):
        raise ConfigError("neighborhood.k_grid: must be a nonempty list of ints >= 1")
    k_grid = tuple(sorted(set(k_grid_node)))

    alphas_node = _get(data, "neighborhood.alphas", default=dict(ALPHA_PRESETS))
    if not isinstance(alphas_node, Mapping):
        raise ConfigError("neighborhood.alphas: must be a mapping")
    alphas = {}
    for name, alpha in alphas_node.items():
        try:
            alpha = float(alpha)
        except (TypeError, ValueError):
            raise ConfigError(f"neighborhood.alphas.{name}: not a number") from None
        if not 0.0 <= alpha <= 1.0:
            raise ConfigError(f"neighborhood.alphas.{name}: alpha must be in [0, 1]")
        alphas[str(name)] = alpha

    methods_node = data.get("methods", list(ALL_METHODS))
    if not isinstance(methods_node, list) or not methods_node:
        raise ConfigError("methods: must be a nonempty list")
    for m in methods_node:
        if m not in ALL_METHODS and m not in alphas:
            raise ConfigError(f"methods: unknown method {m!r}")
        if m.startswith("FS") and m not in alphas:
            raise ConfigError(f"methods: few-shot method {m!r} has no alpha preset")
    methods = tuple(dict.fromkeys(methods_node))

    prompt_node = data.get("prompt", {})
    max_chars = prompt_node.get("max_chars")
    if max_chars is not None and (not isinstance(max_chars, int) or max_chars < 1):
        raise ConfigError("prompt.max_chars: must be a positive integer")

    canonical_raw = json.loads(json.dumps(data, sort_keys=True, default=str))
    return RunConfig(
        seed=seed,
        out_dir=out_dir,
        train=train,
        tests=tests,
        dev_fraction=dev_fraction,
        backends=backends,
        generation=generation,
        sandbox=sandbox,
        runners=dict(runners),
        k_grid=k_grid,
        alphas=alphas,
        methods=methods,
        prompt_max_chars=max_chars,
        prompt_audit=bool(prompt_node.get("audit", False)),
        raw=canonical_raw,
    )


def load_run_config(
    path: str | Path,
    overrides: Sequence[str] = (),
    out_dir_override: str | None = None,
    seed_override: int | None = None,
) -> RunConfig:
    data = apply_overrides(load_config_file(path), overrides)
    return resolve_config(data, out_dir_override=out_dir_override,
                          seed_override=seed_override)
