"""Uniform access to the three model roles: generator, predictor, encoder.

Every operation routes through one of two backend kinds selected by the
``endpoint`` field: an OpenAI-compatible HTTP service (``http://...``) or a
deterministic offline stub (``stub``, plus the predictor-only variants
``stub-oracle`` and ``stub-random``). Responses are cached on disk keyed by
a content hash of the request, so warm reruns are bit-identical and free.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import random
import re
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import requests

from .corpus import CandidateSolution, ProblemSpec

ROLES = ("generator", "predictor", "encoder")
GRANULARITIES = ("pooled", "per_token", "cls")

_STUB_DIM = 64
_LOGPROB_FLOOR = -20.0
_RETRY_ATTEMPTS = 3
_RETRY_BACKOFF_S = 0.5
_HTTP_TIMEOUT_S = 120.0

# Markers the stub generator plants in emitted code; the oracle stub
# predictor and the marker stub runner key off them so offline pipelines
# agree on ground truth end to end.
STUB_PASS_MARKER = "# check: expected-pass"
STUB_FAIL_MARKER = "# check: expected-fail"


class BackendError(RuntimeError):
    pass


@dataclass(frozen=True)
class BackendConfig:
    role: str  # generator | predictor | encoder
    endpoint: str  # "stub", "stub-oracle", "stub-random", or a base URL
    model_name: str
    max_parallel: int = 4
    cache_dir: str | Path | None = None
    seed: int = 0
    api_key: str | None = None

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise BackendError(f"unknown backend role {self.role!r}")
        if not self.endpoint:
            raise BackendError("endpoint must be nonempty")

    @property
    def is_stub(self) -> bool:
        return self.endpoint.startswith("stub")


@dataclass(frozen=True)
class GenerationConfig:
    n: int = 10
    temperature: float = 0.8
    max_tokens: int = 512
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.n < 1:
            raise BackendError("generation n must be >= 1")


@dataclass(frozen=True, eq=False)
class Embedding:
    """L2-normalized dense vector(s) for a text.

    ``pooled`` and ``cls`` carry one unit vector of shape (d,);
    ``per_token`` carries one unit vector per token, shape (t, d).
    """

    vector: np.ndarray
    granularity: str
    source_hash: str

    def __post_init__(self) -> None:
        if self.granularity not in GRANULARITIES:
            raise BackendError(f"unknown granularity {self.granularity!r}")
        self.vector.setflags(write=False)

    @property
    def dim(self) -> int:
        return int(self.vector.shape[-1])


@dataclass(frozen=True)
class YesNoPosterior:
    """Two-way posterior over the yes/no token classes at the first position."""

    p_yes: float
    logprob_yes: float
    logprob_no: float
    fallback_used: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.p_yes < 1.0:
            raise BackendError(f"p_yes out of (0,1): {self.p_yes}")


# --- hashing and cache ----------------------------------------------------


def text_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _request_key(key_obj: dict) -> str:
    return hashlib.sha256(
        json.dumps(key_obj, sort_keys=True, separators=(",", ":")).encode("utf-8")
    ).hexdigest()


class ResponseCache:
    """One file per request, named by the request content hash.

    Writes go through a temp file and an atomic rename, so concurrent
    readers never observe partial content.
    """

    def __init__(self, cache_dir: str | Path):
        self.dir = Path(cache_dir)
        self.dir.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.dir / f"{key}.json"

    def get(self, key: str) -> bytes | None:
        path = self._path(key)
        if not path.is_file():
            return None
        return path.read_bytes()

    def put(self, key: str, raw: bytes) -> None:
        fd, tmp = tempfile.mkstemp(dir=self.dir, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(raw)
            os.replace(tmp, self._path(key))
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


def _cached_fetch(backend: BackendConfig, key_obj: dict, fetch: Callable[[], bytes]) -> bytes:
    if backend.cache_dir is None:
        return fetch()
    cache = ResponseCache(backend.cache_dir)
    key = _request_key(key_obj)
    hit = cache.get(key)
    if hit is not None:
        return hit
    raw = fetch()
    cache.put(key, raw)
    return raw


# --- HTTP plumbing ----------------------------------------------------------


def _post_json(backend: BackendConfig, path: str, payload: dict) -> bytes:
    url = backend.endpoint.rstrip("/") + path
    headers = {"Content-Type": "application/json"}
    if backend.api_key:
        headers["Authorization"] = f"Bearer {backend.api_key}"
    last_error: Exception | None = None
    for attempt in range(_RETRY_ATTEMPTS):
        try:
            resp = requests.post(url, json=payload, headers=headers, timeout=_HTTP_TIMEOUT_S)
            resp.raise_for_status()
            return resp.content
        except requests.RequestException as exc:
            last_error = exc
            if attempt + 1 < _RETRY_ATTEMPTS:
                time.sleep(_RETRY_BACKOFF_S * (2**attempt))
    raise BackendError(
        f"backend {backend.endpoint!r} failed after {_RETRY_ATTEMPTS} attempts: {last_error}"
    )


# --- stub primitives --------------------------------------------------------


def _hash_seed(*parts: object) -> int:
    joined = "|".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(joined.encode("utf-8")).digest()[:8], "big")


def _hash_unit(*parts: object) -> float:
    """Deterministic float strictly inside (0, 1)."""
    return (_hash_seed(*parts) % (2**53) + 0.5) / 2**53


def _stub_unit_vector(dim: int, *parts: object) -> np.ndarray:
    rng = np.random.default_rng(_hash_seed(*parts))
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


# --- embedding --------------------------------------------------------------


def _stub_embed_raw(text: str, granularity: str, backend: BackendConfig) -> bytes:
    tokens = tokenize(text)
    if not tokens:
        raise BackendError("text has no tokens to embed")
    base = (backend.model_name, backend.seed)
    if granularity == "cls":
        vectors = [_stub_unit_vector(_STUB_DIM, *base, "cls", text)]
    elif granularity == "per_token":
        vectors = [_stub_unit_vector(_STUB_DIM, *base, "tok", t) for t in tokens]
    else:
        toks = np.stack([_stub_unit_vector(_STUB_DIM, *base, "tok", t) for t in tokens])
        mean = toks.mean(axis=0)
        norm = np.linalg.norm(mean)
        if norm == 0.0:
            mean = _stub_unit_vector(_STUB_DIM, *base, "fallback", text)
            norm = 1.0
        vectors = [mean / norm]
    data = [{"embedding": [float(x) for x in v]} for v in vectors]
    return json.dumps({"data": data}, sort_keys=True).encode("utf-8")


def _remote_embed_raw(text: str, granularity: str, backend: BackendConfig) -> bytes:
    if granularity == "per_token":
        inputs = tokenize(text)
        if not inputs:
            raise BackendError("text has no tokens to embed")
    else:
        # cls granularity delegates pooling to the serving side; the request
        # is the plain text either way.
        inputs = [text]
    payload = {"model": backend.model_name, "input": inputs}
    return _post_json(backend, "/embeddings", payload)


def embed(text: str, granularity: str, backend: BackendConfig) -> Embedding:
    """Embed ``text`` at the requested granularity, serving from cache when warm."""
    if backend.role != "encoder":
        raise BackendError(f"embed requires an encoder backend, got {backend.role!r}")
    if not text:
        raise BackendError("cannot embed empty text")
    if granularity not in GRANULARITIES:
        raise BackendError(f"unknown granularity {granularity!r}")
    source_hash = text_hash(text)
    key_obj = {
        "op": "embed",
        "model": backend.model_name,
        "granularity": granularity,
        "source_hash": source_hash,
    }
    if backend.is_stub:
        # Stub vectors are pure functions of (inputs, seed); the seed is
        # therefore part of the request identity for caching purposes.
        key_obj["seed"] = backend.seed
        fetch = lambda: _stub_embed_raw(text, granularity, backend)
    else:
        fetch = lambda: _remote_embed_raw(text, granularity, backend)
    raw = _cached_fetch(backend, key_obj, fetch)
    try:
        data = json.loads(raw)["data"]
        matrix = np.asarray([row["embedding"] for row in data], dtype=np.float64)
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise BackendError(f"malformed embeddings response: {exc}") from exc
    if matrix.ndim != 2 or matrix.shape[0] == 0:
        raise BackendError("embeddings response carries no vectors")
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise BackendError("embeddings response contains a zero vector")
    matrix = matrix / norms
    vector = matrix if granularity == "per_token" else matrix[0]
    return Embedding(vector=vector, granularity=granularity, source_hash=source_hash)


def embed_many(
    texts: Sequence[str], granularity: str, backend: BackendConfig
) -> list[Embedding]:
    """Embed a batch, parallelizing remote calls up to ``max_parallel``."""
    if backend.is_stub or backend.max_parallel <= 1 or len(texts) <= 1:
        return [embed(t, granularity, backend) for t in texts]
    with ThreadPoolExecutor(max_workers=backend.max_parallel) as pool:
        return list(pool.map(lambda t: embed(t, granularity, backend), texts))


# --- code generation ---------------------------------------------------------

_STUB_CODE_SHAPES = (
    "def {entry}(*args):\n"
    "    {marker}\n"
    "    acc = {a}\n"
    "    for item in args:\n"
    "        acc = acc * 31 + hash(item)\n"
    "    return acc % {b}\n",
    "def {entry}(*args):\n"
    "    {marker}\n"
    "    total = sum(hash(item) for item in args)\n"
    "    return total + {a}\n",
    "def {entry}(*args):\n"
    "    {marker}\n"
    "    values = [hash(item) ^ {a} for item in args]\n"
    "    return min(values) if values else {b}\n",
)


def _stub_generate(problem: ProblemSpec, gen_cfg: GenerationConfig,
                   backend: BackendConfig) -> list[str]:
    seed = _hash_seed(backend.model_name, backend.seed, gen_cfg.seed, problem.id)
    rng = random.Random(seed)
    n = gen_cfg.n
    if n == 1:
        correct = {0} if rng.random() < 0.5 else set()
    else:
        n_correct = 1 + rng.randrange(n - 1)  # both classes always present
        correct = set(rng.sample(range(n), n_correct))
    entry = problem.entry_point or "solve"
    codes = []
    for i in range(n):
        marker = STUB_PASS_MARKER if i in correct else STUB_FAIL_MARKER
        shape = _STUB_CODE_SHAPES[_hash_seed(seed, i, "shape") % len(_STUB_CODE_SHAPES)]
        codes.append(
            shape.format(
                entry=entry,
                marker=marker,
                a=_hash_seed(seed, i, "a") % 9973,
                b=1 + _hash_seed(seed, i, "b") % 9973,
            )
        )
    return codes


def generate_solutions(
    problem: ProblemSpec, gen_cfg: GenerationConfig, backend: BackendConfig
) -> list[CandidateSolution]:
    """Generate ``n`` candidate solutions, ranked by the backend's ordering."""
    if backend.role != "generator":
        raise BackendError(f"generate requires a generator backend, got {backend.role!r}")
    key_obj = {
        "op": "generate",
        "model": backend.model_name,
        "problem": text_hash(problem.description),
        "n": gen_cfg.n,
        "temperature": gen_cfg.temperature,
        "max_tokens": gen_cfg.max_tokens,
        "seed": gen_cfg.seed,
    }
    if backend.is_stub:
        key_obj["backend_seed"] = backend.seed
        key_obj["problem_id"] = problem.id
        fetch = lambda: json.dumps(
            {"choices": [{"text": c} for c in _stub_generate(problem, gen_cfg, backend)]},
            sort_keys=True,
        ).encode("utf-8")
    else:
        payload = {
            "model": backend.model_name,
            "prompt": problem.description,
            "n": gen_cfg.n,
            "temperature": gen_cfg.temperature,
            "max_tokens": gen_cfg.max_tokens,
        }
        if gen_cfg.seed is not None:
            payload["seed"] = gen_cfg.seed
        fetch = lambda: _post_json(backend, "/completions", payload)
    raw = _cached_fetch(backend, key_obj, fetch)
    try:
        choices = json.loads(raw)["choices"]
        codes = [str(c["text"]) for c in choices]
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise BackendError(f"malformed generation response: {exc}") from exc
    if len(codes) != gen_cfg.n:
        raise BackendError(f"backend returned {len(codes)} choices, expected {gen_cfg.n}")
    return [
        CandidateSolution(
            problem_id=problem.id,
            solution_id=f"s{i + 1:02d}",
            code=code,
            rank_hint=i + 1,
            generator_tag=backend.model_name,
        )
        for i, code in enumerate(codes)
    ]


# --- yes/no posterior ---------------------------------------------------------


def two_way_posterior(logprob_yes: float, logprob_no: float) -> float:
    """p_yes = e^y / (e^y + e^n), computed shift-invariantly."""
    x = logprob_yes - logprob_no
    if x >= 0:
        z = math.exp(-x)
        return 1.0 / (1.0 + z)
    z = math.exp(x)
    return z / (1.0 + z)


def fold_token_logprobs(top_logprobs: dict[str, float]) -> tuple[float | None, float | None]:
    """Sum probability mass over case/whitespace variants of yes and no."""
    acc: dict[str, float | None] = {"yes": None, "no": None}
    for token, lp in top_logprobs.items():
        canon = token.strip().lower()
        if canon in acc:
            prev = acc[canon]
            acc[canon] = float(lp) if prev is None else float(np.logaddexp(prev, lp))
    return acc["yes"], acc["no"]


def _stub_posterior_raw(prompt: str, backend: BackendConfig) -> bytes:
    if backend.endpoint == "stub-oracle":
        # Ground truth comes from the marker closest to the end of the
        # prompt, i.e. the one inside the query block.
        pass_at = prompt.rfind(STUB_PASS_MARKER)
        fail_at = prompt.rfind(STUB_FAIL_MARKER)
        if pass_at < 0 and fail_at < 0:
            raise BackendError("oracle stub: prompt carries no ground-truth marker")
        if pass_at > fail_at:
            top = {"yes": -0.02, "no": -4.0}
        else:
            top = {"yes": -4.0, "no": -0.02}
    elif backend.endpoint == "stub-random":
        u = _hash_unit(backend.model_name, backend.seed, "uniform", prompt)
        top = {"yes": math.log(u), "no": math.log1p(-u)}
    else:
        u_yes = _hash_unit(backend.model_name, backend.seed, "yes", prompt)
        u_no = _hash_unit(backend.model_name, backend.seed, "no", prompt)
        top = {"yes": -6.0 * u_yes, "no": -6.0 * u_no}
    body = {"choices": [{"logprobs": {"top_logprobs": [top]}}]}
    return json.dumps(body, sort_keys=True).encode("utf-8")


def yes_no_posterior(prompt: str, backend: BackendConfig) -> YesNoPosterior:
    """Score a prompt by the yes-vs-no posterior at the first generated token.

    Surface variants (case, leading whitespace) of each class are folded by
    summing their probabilities. A class absent from the returned top-k is
    floored at -20 with ``fallback_used`` set; both classes absent is an
    error rather than a silent 0.5.
    """
    if backend.role != "predictor":
        raise BackendError(f"posterior requires a predictor backend, got {backend.role!r}")
    if not prompt:
        raise BackendError("prompt must be nonempty")
    key_obj = {
        "op": "yes_no_posterior",
        "model": backend.model_name,
        "endpoint_kind": backend.endpoint if backend.is_stub else "remote",
        "prompt_hash": text_hash(prompt),
    }
    if backend.is_stub:
        key_obj["seed"] = backend.seed
        fetch = lambda: _stub_posterior_raw(prompt, backend)
    else:
        payload = {
            "model": backend.model_name,
            "prompt": prompt,
            "max_tokens": 1,
            "temperature": 0.0,
            "logprobs": 20,
        }
        fetch = lambda: _post_json(backend, "/completions", payload)
    raw = _cached_fetch(backend, key_obj, fetch)
    try:
        choice = json.loads(raw)["choices"][0]
        top = choice["logprobs"]["top_logprobs"][0]
    except (KeyError, IndexError, TypeError, json.JSONDecodeError) as exc:
        raise BackendError(f"malformed logprobs response: {exc}") from exc
    lp_yes, lp_no = fold_token_logprobs(top)
    if lp_yes is None and lp_no is None:
        raise BackendError(
            f"neither yes nor no among top tokens: {sorted(top)[:10]}"
        )
    fallback = lp_yes is None or lp_no is None
    if lp_yes is None:
        lp_yes = _LOGPROB_FLOOR
    if lp_no is None:
        lp_no = _LOGPROB_FLOOR
    return YesNoPosterior(
        p_yes=two_way_posterior(lp_yes, lp_no),
        logprob_yes=lp_yes,
        logprob_no=lp_no,
        fallback_used=fallback,
    )
