from __future__ import annotations

import json
import threading

import httpx
import numpy as np
import pytest

from claimbench.errors import (
    AuthRejected,
    ConfigError,
    DimensionMismatch,
    EndpointTimeout,
    NonRetryableStatus,
    TransportError,
)
from claimbench.gateway import (
    EndpointConfig,
    GatewayClient,
    GenerationParams,
    RetryPolicy,
    RunManifest,
    complete,
    embed,
    run_evaluation,
    shard,
)
from claimbench.stub import StubFailure, StubServer, echo_responder

SECRET = "sk-test-5ecret-d0-not-leak"


def _endpoint(**kw) -> EndpointConfig:
    kw.setdefault("retry", RetryPolicy(max_attempts=3, backoff_base=0.0))
    return EndpointConfig("http://model.invalid/v1", model="m", token_env="CB_TEST_TOKEN", **kw)


def _client(handler, endpoint=None) -> GatewayClient:
    return GatewayClient(endpoint or _endpoint(), httpx.MockTransport(handler), sleep=lambda s: None)


def _ok(text: str) -> httpx.Response:
    return httpx.Response(200, json={"choices": [{"index": 0, "text": text}]})


def test_defaults_are_greedy_decoding():
    p = GenerationParams()
    assert (p.max_new_tokens, p.repetition_penalty, p.temperature, p.do_sample, p.num_beams) == (512, 1.1, 0.0, False, 1)
    fields = p.request_fields()
    assert fields["max_tokens"] == 512 and fields["extensions"]["repetition_penalty"] == 1.1


def test_request_body_and_auth(monkeypatch):
    monkeypatch.setenv("CB_TEST_TOKEN", SECRET)
    seen = {}

    def handler(request: httpx.Request) -> httpx.Response:
        seen["url"] = str(request.url)
        seen["auth"] = request.headers.get("authorization")
        seen["body"] = json.loads(request.content)
        return _ok("ICD-10-CM Diagnoses:")

    assert _client(handler).complete("hello") == "ICD-10-CM Diagnoses:"
    assert seen["url"] == "http://model.invalid/v1/completions"
    assert seen["auth"] == f"Bearer {SECRET}"
    assert seen["body"]["prompt"] == "hello" and seen["body"]["model"] == "m"
    assert seen["body"]["temperature"] == 0.0


def test_retry_500_500_200():
    statuses = iter([500, 500, 200])
    delays = []

    def handler(request):
        status = next(statuses)
        return _ok("done") if status == 200 else httpx.Response(status)

    client = GatewayClient(_endpoint(retry=RetryPolicy(3, 0.5, 8.0)), httpx.MockTransport(handler), sleep=delays.append)
    assert client.complete("p") == "done"
    assert client.last_attempts == 3
    assert delays == [0.5, 1.0]


def test_retries_exhausted():
    client = _client(lambda r: httpx.Response(503))
    with pytest.raises(TransportError):
        client.complete("p")
    assert client.last_attempts == 3


def test_timeout_every_attempt():
    def handler(request):
        raise httpx.ReadTimeout("slow", request=request)

    with pytest.raises(EndpointTimeout):
        _client(handler).complete("p")


@pytest.mark.parametrize("status, exc", [(401, AuthRejected), (403, AuthRejected), (400, NonRetryableStatus), (404, NonRetryableStatus)])
def test_non_retryable(status, exc):
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(status)

    with pytest.raises(exc):
        _client(handler).complete("p")
    assert len(calls) == 1


def test_malformed_body_and_empty_prompt():
    with pytest.raises(NonRetryableStatus):
        _client(lambda r: httpx.Response(200, json={"nope": 1})).complete("p")
    with pytest.raises(ConfigError):
        _client(lambda r: _ok("x")).complete("")


def test_embed_order_and_dim():
    def handler(request):
        texts = json.loads(request.content)["input"]
        data = [{"index": i, "embedding": [float(len(t)), float(i), 0.0]} for i, t in enumerate(texts)]
        return httpx.Response(200, json={"data": list(reversed(data))})

    vecs = _client(handler, _endpoint(embedding_dim=3)).embed(["a", "bb", "ccc"])
    assert [v.tolist() for v in vecs] == [[1, 0, 0], [2, 1, 0], [3, 2, 0]]
    with pytest.raises(DimensionMismatch) as err:
        _client(handler, _endpoint(embedding_dim=4)).embed(["a", "b"])
    assert err.value.index == 0


def test_embed_batch_consistency_against_stub():
    with StubServer(echo_responder({}), embedding_dim=16) as url:
        endpoint = EndpointConfig(url, embedding_dim=16)
        three = embed(["alpha note", "beta", "gamma"], endpoint)
        one = embed(["alpha note"], endpoint)
        assert len(three) == 3 and all(v.shape == (16,) for v in three)
        assert np.array_equal(one[0], three[0])


def test_stub_round_trip_and_auth(monkeypatch):
    monkeypatch.setenv("CB_TEST_TOKEN", SECRET)
    with StubServer(lambda p: f"echo:{p}", required_token=SECRET) as url:
        endpoint = EndpointConfig(url, token_env="CB_TEST_TOKEN")
        assert complete("x", GenerationParams(), endpoint) == "echo:x"
        monkeypatch.setenv("CB_TEST_TOKEN", "wrong")
        with pytest.raises(AuthRejected):
            complete("x", GenerationParams(), endpoint)


def test_from_env(monkeypatch):
    monkeypatch.delenv("CLAIMBENCH_ENDPOINT", raising=False)
    with pytest.raises(ConfigError):
        EndpointConfig.from_env()
    monkeypatch.setenv("CLAIMBENCH_ENDPOINT", "http://h/v1")
    monkeypatch.setenv("CLAIMBENCH_MODEL", "phi")
    cfg = EndpointConfig.from_env(timeout=5.0)
    assert (cfg.base_url, cfg.model, cfg.timeout) == ("http://h/v1", "phi", 5.0)


# -- runner -------------------------------------------------------------------


def test_shard_arithmetic():
    ids = [f"e{i}" for i in range(8)]
    assert [len(s) for s in shard(ids, 4)] == [2, 2, 2, 2]
    assert [len(s) for s in shard(ids[:7], 3)] == [3, 2, 2]
    assert sum(shard(ids, 3), []) == ids
    with pytest.raises(ConfigError):
        shard(ids, 0)


def _prompts(n: int) -> dict[str, str]:
    return {f"e{i:02d}": f"prompt number {i}" for i in range(n)}


def _strip_latency(manifest: RunManifest) -> list[dict]:
    return [{k: v for k, v in c.to_dict().items() if k != "latency_ms"} for c in manifest.cases]


def test_workers_one_vs_four_identical(tmp_path):
    prompts = _prompts(8)
    with StubServer(lambda p: p.upper()) as url:
        endpoint = EndpointConfig(url)
        one = run_evaluation(prompts, endpoint, workers=1, run_dir=tmp_path / "a")
        four = run_evaluation(prompts, endpoint, workers=4, run_dir=tmp_path / "b")
    assert len(four.cases) == 8
    assert [c.encounter_id for c in four.cases] == sorted(prompts)
    assert _strip_latency(one) == _strip_latency(four)
    assert one.header == four.header


def test_shards_run_concurrently_on_separate_clients():
    barrier = threading.Barrier(4, timeout=5)
    clients = []

    class Recording(GatewayClient):
        def __init__(self, endpoint):
            def handler(request):
                return _ok("x")

            super().__init__(endpoint, httpx.MockTransport(handler))
            clients.append(self)
            barrier.wait()  # all four shards must be live at once

    manifest = run_evaluation(_prompts(8), _endpoint(), workers=4, client_factory=Recording)
    assert len(clients) == 4 and len(manifest.cases) == 8


def test_failure_is_isolated(tmp_path):
    def responder(prompt):
        if prompt.endswith(" 3"):
            raise StubFailure(400, "rejected")
        return "ok"

    with StubServer(responder) as url:
        manifest = run_evaluation(_prompts(8), EndpointConfig(url), workers=2, run_dir=tmp_path)
    errors = manifest.errors()
    assert len(manifest.cases) == 8 and [c.encounter_id for c in errors] == ["e03"]
    assert errors[0].error["kind"] == "non_retryable_status"
    assert RunManifest.load(tmp_path).errors()[0].encounter_id == "e03"


def test_timeouts_recorded_per_case():
    def handler(request):
        raise httpx.ConnectTimeout("down", request=request)

    def factory(endpoint):
        return GatewayClient(endpoint, httpx.MockTransport(handler), sleep=lambda s: None)

    manifest = run_evaluation(_prompts(3), _endpoint(), client_factory=factory)
    assert all(c.error["kind"] == "timeout" and c.attempts == 3 for c in manifest.cases)


def test_resume_skips_completed_cases(tmp_path):
    prompts = _prompts(6)
    calls = []
    flaky = {"e02", "e04"}

    def responder(prompt):
        calls.append(prompt)
        eid = f"e{int(prompt.rsplit(' ', 1)[1]):02d}"
        if eid in flaky:
            raise StubFailure(400)
        return prompt[::-1]

    with StubServer(responder) as url:
        endpoint = EndpointConfig(url)
        first = run_evaluation(prompts, endpoint, workers=2, run_dir=tmp_path / "run")
        assert len(first.errors()) == 2
        flaky.clear()
        calls.clear()
        resumed = run_evaluation(prompts, endpoint, workers=3, run_dir=tmp_path / "run")
        assert sorted(calls) == [prompts["e02"], prompts["e04"]]
        single = run_evaluation(prompts, endpoint, run_dir=tmp_path / "single")
    assert _strip_latency(resumed) == _strip_latency(single)
    assert resumed.run_id == single.run_id


def test_resume_tolerates_torn_line(tmp_path):
    prompts = _prompts(4)
    with StubServer(lambda p: "out") as url:
        endpoint = EndpointConfig(url)
        run_evaluation(prompts, endpoint, run_dir=tmp_path)
        with (tmp_path / "cases.jsonl").open("a") as fh:
            fh.write('{"encounter_id": "e0')
        again = run_evaluation(prompts, endpoint, run_dir=tmp_path)
    assert len(again.cases) == 4 and not again.errors()


def test_run_dir_mismatch(tmp_path):
    with StubServer(lambda p: "out") as url:
        run_evaluation(_prompts(2), EndpointConfig(url), run_dir=tmp_path)
        with pytest.raises(ConfigError):
            run_evaluation(_prompts(3), EndpointConfig(url), run_dir=tmp_path)


def test_no_secret_in_artifacts(tmp_path, monkeypatch, caplog):
    monkeypatch.setenv("CB_TEST_TOKEN", SECRET)
    caplog.set_level("DEBUG")
    statuses = iter([500] + [200] * 10)

    def responder(prompt):
        if next(statuses) == 500:
            raise StubFailure(500)
        return "ok"

    with StubServer(responder, required_token=SECRET) as url:
        endpoint = EndpointConfig(url, token_env="CB_TEST_TOKEN", retry=RetryPolicy(3, 0.0))
        manifest = run_evaluation(_prompts(3), endpoint, run_dir=tmp_path, metadata={"variant": "base"})
    assert not manifest.errors()
    assert SECRET not in json.dumps(endpoint.public())
    for path in tmp_path.rglob("*"):
        if path.is_file():
            assert SECRET not in path.read_text()
    assert SECRET not in caplog.text
