"""HTTP client for completion/embedding services and the sharded runner.

Wire contract (JSON over HTTP, OpenAI-completions style)::

    POST {base_url}/completions
      {"model": ..., "prompt": ..., "max_tokens": 512, "temperature": 0.0,
       "extensions": {"repetition_penalty": 1.1, "do_sample": false, "num_beams": 1}}
      -> {"choices": [{"text": ...}, ...]}

    POST {base_url}/embeddings
      {"model": ..., "input": [text, ...]}
      -> {"data": [{"index": i, "embedding": [...]}, ...]}

The bearer token is read from the environment variable named by
``EndpointConfig.token_env`` at request time and never stored elsewhere.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import httpx
import numpy as np

from claimbench.errors import (
    AuthRejected,
    ConfigError,
    DimensionMismatch,
    EndpointError,
    EndpointTimeout,
    NonRetryableStatus,
    TransportError,
)

__all__ = [
    "GenerationParams",
    "RetryPolicy",
    "EndpointConfig",
    "GatewayClient",
    "CaseResult",
    "RunManifest",
    "complete",
    "embed",
    "prompt_hash",
    "shard",
    "run_evaluation",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GenerationParams:
    """Greedy decoding: no sampling, one beam, temperature 0."""

    max_new_tokens: int = 512
    repetition_penalty: float = 1.1
    temperature: float = 0.0
    do_sample: bool = False
    num_beams: int = 1

    def request_fields(self) -> dict[str, Any]:
        return {
            "max_tokens": self.max_new_tokens,
            "temperature": self.temperature,
            "extensions": {
                "repetition_penalty": self.repetition_penalty,
                "do_sample": self.do_sample,
                "num_beams": self.num_beams,
            },
        }


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    backoff_base: float = 0.5
    backoff_max: float = 8.0

    def delay(self, attempt: int) -> float:
        return min(self.backoff_max, self.backoff_base * 2 ** (attempt - 1))


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model: str = "default"
    token_env: str | None = "CLAIMBENCH_API_KEY"
    timeout: float = 120.0
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    embedding_dim: int | None = None

    @classmethod
    def from_env(cls, prefix: str = "CLAIMBENCH", **overrides: Any) -> "EndpointConfig":
        """Read ``{prefix}_ENDPOINT`` and ``{prefix}_MODEL``; keyword overrides win."""
        values: dict[str, Any] = {
            "base_url": os.environ.get(f"{prefix}_ENDPOINT"),
            "model": os.environ.get(f"{prefix}_MODEL", "default"),
            "token_env": f"{prefix}_API_KEY",
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        if not values["base_url"]:
            raise ConfigError(f"no endpoint URL: pass one or set {prefix}_ENDPOINT")
        return cls(**values)

    def token(self) -> str | None:
        return os.environ.get(self.token_env) if self.token_env else None

    def public(self) -> dict[str, Any]:
        """Description safe to write into reports (no secret material)."""
        return {
            "base_url": self.base_url,
            "model": self.model,
            "timeout": self.timeout,
            "retry": asdict(self.retry),
            "embedding_dim": self.embedding_dim,
        }


_RETRYABLE_STATUS = {408, 409, 425, 429}


class GatewayClient:
    """One connection pool to one endpoint; use a separate client per thread."""

    def __init__(
        self,
        endpoint: EndpointConfig,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.endpoint = endpoint
        self._sleep = sleep
        self._client = httpx.Client(
            base_url=endpoint.base_url.rstrip("/") + "/",
            timeout=endpoint.timeout,
            transport=transport,
        )
        self.last_attempts = 0

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "GatewayClient":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()

    def _headers(self) -> dict[str, str]:
        token = self.endpoint.token()
        return {"Authorization": f"Bearer {token}"} if token else {}

    def _post(self, path: str, payload: Mapping[str, Any]) -> Any:
        policy = self.endpoint.retry
        error: EndpointError | None = None
        for attempt in range(1, policy.max_attempts + 1):
            self.last_attempts = attempt
            try:
                resp = self._client.post(path, json=payload, headers=self._headers())
            except httpx.TimeoutException as exc:
                error = EndpointTimeout(f"{path}: timed out ({type(exc).__name__})")
            except httpx.TransportError as exc:
                error = TransportError(f"{path}: {type(exc).__name__}: {exc}")
            else:
                status = resp.status_code
                if status in (401, 403):
                    raise AuthRejected(f"{path}: HTTP {status}")
                if status < 400:
                    try:
                        return resp.json()
                    except ValueError:
                        raise NonRetryableStatus(f"{path}: response is not JSON", status) from None
                if status >= 500 or status in _RETRYABLE_STATUS:
                    error = TransportError(f"{path}: HTTP {status}")
                else:
                    raise NonRetryableStatus(f"{path}: HTTP {status}", status)
            log.info("attempt %d/%d to %s failed: %s", attempt, policy.max_attempts, path, error)
            if attempt < policy.max_attempts:
                self._sleep(policy.delay(attempt))
        assert error is not None
        raise error

    def complete(self, prompt: str, params: GenerationParams = GenerationParams()) -> str:
        self.last_attempts = 0
        if not prompt:
            raise ConfigError("prompt must be non-empty")
        body = {"model": self.endpoint.model, "prompt": prompt, **params.request_fields()}
        data = self._post("completions", body)
        try:
            text = data["choices"][0]["text"]
        except (KeyError, IndexError, TypeError):
            raise NonRetryableStatus("completions: response has no choices[0].text", 200) from None
        if not isinstance(text, str):
            raise NonRetryableStatus("completions: choices[0].text is not a string", 200)
        return text

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        texts = list(texts)
        if not texts:
            return []
        data = self._post("embeddings", {"model": self.endpoint.model, "input": texts})
        try:
            items = sorted(data["data"], key=lambda d: d.get("index", 0))
            vectors = [np.asarray(d["embedding"], dtype=np.float32) for d in items]
        except (KeyError, TypeError, ValueError):
            raise NonRetryableStatus("embeddings: malformed response", 200) from None
        if len(vectors) != len(texts):
            raise NonRetryableStatus(
                f"embeddings: {len(vectors)} vectors for {len(texts)} texts", 200
            )
        dim = self.endpoint.embedding_dim or vectors[0].shape[0]
        for i, vec in enumerate(vectors):
            if vec.ndim != 1 or vec.shape[0] != dim:
                raise DimensionMismatch(
                    f"embedding for text {i} has length {vec.size}, expected {dim}", i
                )
        return vectors


def complete(prompt: str, params: GenerationParams, endpoint: EndpointConfig) -> str:
    with GatewayClient(endpoint) as client:
        return client.complete(prompt, params)


def embed(texts: Sequence[str], endpoint: EndpointConfig, batch_size: int = 64) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    with GatewayClient(endpoint) as client:
        for start in range(0, len(texts), batch_size):
            out += client.embed(texts[start : start + batch_size])
    return out


# -- evaluation runs ----------------------------------------------------------


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CaseResult:
    encounter_id: str
    prompt_hash: str
    raw_output: str | None
    latency_ms: float
    attempts: int = 1
    error: Mapping[str, str] | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self) -> dict[str, Any]:
        return {
            "encounter_id": self.encounter_id,
            "prompt_hash": self.prompt_hash,
            "raw_output": self.raw_output,
            "latency_ms": self.latency_ms,
            "attempts": self.attempts,
            "error": dict(self.error) if self.error else None,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "CaseResult":
        return cls(
            str(data["encounter_id"]),
            data["prompt_hash"],
            data.get("raw_output"),
            float(data.get("latency_ms", 0.0)),
            int(data.get("attempts", 1)),
            data.get("error"),
        )


@dataclass(frozen=True)
class RunManifest:
    header: Mapping[str, Any]
    cases: tuple[CaseResult, ...]

    HEADER_FILE = "manifest.json"
    CASES_FILE = "cases.jsonl"

    @property
    def run_id(self) -> str:
        return self.header["run_id"]

    def outputs(self) -> dict[str, str | None]:
        return {c.encounter_id: c.raw_output for c in self.cases}

    def errors(self) -> list[CaseResult]:
        return [c for c in self.cases if not c.ok]

    def save(self, run_dir: str | os.PathLike) -> None:
        root = Path(run_dir)
        root.mkdir(parents=True, exist_ok=True)
        _atomic_write(root / self.HEADER_FILE, json.dumps(self.header, indent=1, sort_keys=True) + "\n")
        lines = "".join(json.dumps(c.to_dict(), sort_keys=True) + "\n" for c in self.cases)
        _atomic_write(root / self.CASES_FILE, lines)

    @classmethod
    def load(cls, run_dir: str | os.PathLike) -> "RunManifest":
        root = Path(run_dir)
        try:
            header = json.loads((root / cls.HEADER_FILE).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"no run manifest in {root}") from None
        return cls(header, tuple(_read_cases(root / cls.CASES_FILE)))


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _read_cases(path: Path) -> list[CaseResult]:
    if not path.exists():
        return []
    out = []
    for line in path.read_text(encoding="utf-8").splitlines():
        try:
            out.append(CaseResult.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            # a torn final line from an interrupted run
            continue
    return out


def shard(ids: Sequence[str], workers: int) -> list[list[str]]:
    """Split ``ids`` into ``workers`` contiguous shards differing in size by at most 1."""
    if workers < 1:
        raise ConfigError("workers must be a positive integer")
    base, extra = divmod(len(ids), workers)
    out, start = [], 0
    for w in range(workers):
        size = base + (1 if w < extra else 0)
        out.append(list(ids[start : start + size]))
        start += size
    return out


def _run_id(header: Mapping[str, Any], hashes: Mapping[str, str]) -> str:
    blob = json.dumps({"header": header, "prompts": sorted(hashes.items())}, sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def run_evaluation(
    prompts: Mapping[str, str],
    endpoint: EndpointConfig,
    params: GenerationParams = GenerationParams(),
    workers: int = 1,
    run_dir: str | os.PathLike | None = None,
    metadata: Mapping[str, Any] | None = None,
    client_factory: Callable[[EndpointConfig], GatewayClient] | None = None,
) -> RunManifest:
    """Generate one completion per prompt, ``workers`` shards in parallel.

    Encounter ids are sorted and cut into contiguous shards; each shard runs
    its cases one at a time on its own client. Failures are recorded per case.
    With ``run_dir`` every finished case is appended to ``cases.jsonl`` as it
    completes, and a rerun skips cases that already succeeded with the same
    prompt.
    """
    client_factory = client_factory or GatewayClient
    hashes = {eid: prompt_hash(p) for eid, p in prompts.items()}
    header: dict[str, Any] = {
        **dict(metadata or {}),
        "model": endpoint.model,
        "endpoint": endpoint.public(),
        "generation_params": asdict(params),
        "n_cases": len(prompts),
    }
    header["run_id"] = _run_id(header, hashes)

    done: dict[str, CaseResult] = {}
    sink = None
    if run_dir is not None:
        root = Path(run_dir)
        root.mkdir(parents=True, exist_ok=True)
        header_path = root / RunManifest.HEADER_FILE
        if header_path.exists():
            old = json.loads(header_path.read_text(encoding="utf-8"))
            if old.get("run_id") != header["run_id"]:
                raise ConfigError(
                    f"{root} holds run {old.get('run_id')}, not {header['run_id']}; "
                    "use a fresh directory"
                )
        _atomic_write(header_path, json.dumps(header, indent=1, sort_keys=True) + "\n")
        for case in _read_cases(root / RunManifest.CASES_FILE):
            if case.ok and hashes.get(case.encounter_id) == case.prompt_hash:
                done[case.encounter_id] = case
        # rewrite without stale or failed entries, then append as we go
        _atomic_write(
            root / RunManifest.CASES_FILE,
            "".join(json.dumps(c.to_dict(), sort_keys=True) + "\n" for c in done.values()),
        )
        sink = (root / RunManifest.CASES_FILE).open("a", encoding="utf-8")

    lock = threading.Lock()
    results: dict[str, CaseResult] = dict(done)
    todo = sorted(eid for eid in prompts if eid not in done)

    def run_shard(ids: list[str]) -> None:
        if not ids:
            return
        client = client_factory(endpoint)
        try:
            for eid in ids:
                start = time.perf_counter()
                try:
                    text = client.complete(prompts[eid], params)
                    error = None
                except EndpointError as exc:
                    text, error = None, {"kind": exc.kind, "message": str(exc)}
                except ConfigError as exc:
                    text, error = None, {"kind": "config", "message": str(exc)}
                result = CaseResult(
                    eid,
                    hashes[eid],
                    text,
                    round((time.perf_counter() - start) * 1000, 3),
                    client.last_attempts,
                    error,
                )
                with lock:
                    results[eid] = result
                    if sink is not None:
                        sink.write(json.dumps(result.to_dict(), sort_keys=True) + "\n")
                        sink.flush()
        finally:
            client.close()

    try:
        shards = shard(todo, workers)
        if workers == 1:
            run_shard(shards[0])
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                for fut in [pool.submit(run_shard, s) for s in shards]:
                    fut.result()
    finally:
        if sink is not None:
            sink.close()

    manifest = RunManifest(header, tuple(results[eid] for eid in sorted(results)))
    if run_dir is not None:
        manifest.save(run_dir)
    return manifest
