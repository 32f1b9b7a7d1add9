"""In-process HTTP stub of the completion/embedding contract.

Used by the tests and demos in place of a model server::

    with StubServer(lambda prompt: answers[prompt]) as url:
        endpoint = EndpointConfig(url)
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Mapping

from claimbench.synthetic import hashing_embedding

__all__ = ["StubServer", "StubFailure", "echo_responder"]


def echo_responder(answers: Mapping[str, str], default: str = "") -> Callable[[str], str]:
    """Responder returning ``answers[prompt]`` (``default`` when unknown)."""

    def respond(prompt: str) -> str:
        return answers.get(prompt, default)

    return respond


class StubServer:
    """Threaded local server; ``responder`` maps a prompt to completion text.

    ``responder`` may raise :class:`StubFailure` to make the server answer
    with an HTTP error status instead.
    """

    def __init__(
        self,
        responder: Callable[[str], str],
        embedding_dim: int = 384,
        required_token: str | None = None,
        host: str = "127.0.0.1",
    ):
        self.responder = responder
        self.embedding_dim = embedding_dim
        self.required_token = required_token
        self.requests: list[dict] = []
        self._lock = threading.Lock()
        self._server = ThreadingHTTPServer((host, 0), self._handler())
        self._server.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}/v1"

    def _handler(self):
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args) -> None:  # keep test output quiet
                pass

            def _send(self, status: int, body: dict) -> None:
                data = json.dumps(body).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def do_POST(self) -> None:
                length = int(self.headers.get("Content-Length", 0))
                try:
                    payload = json.loads(self.rfile.read(length) or b"{}")
                except json.JSONDecodeError:
                    self._send(400, {"error": "bad json"})
                    return
                with stub._lock:
                    stub.requests.append({"path": self.path, "headers": dict(self.headers), "body": payload})
                if stub.required_token is not None:
                    if self.headers.get("Authorization") != f"Bearer {stub.required_token}":
                        self._send(401, {"error": "unauthorized"})
                        return
                if self.path.endswith("/completions"):
                    try:
                        text = stub.responder(payload.get("prompt", ""))
                    except StubFailure as exc:
                        self._send(exc.status, {"error": str(exc)})
                        return
                    self._send(200, {"choices": [{"index": 0, "text": text}]})
                elif self.path.endswith("/embeddings"):
                    texts = payload.get("input", [])
                    if isinstance(texts, str):
                        texts = [texts]
                    vecs = hashing_embedding(texts, stub.embedding_dim)
                    self._send(
                        200,
                        {"data": [{"index": i, "embedding": v.tolist()} for i, v in enumerate(vecs)]},
                    )
                else:
                    self._send(404, {"error": "not found"})

        return Handler

    def start(self) -> str:
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self.url

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self) -> str:
        return self.start()

    def __exit__(self, *exc: object) -> None:
        self.stop()


class StubFailure(Exception):
    def __init__(self, status: int = 500, message: str = "stub failure"):
        self.status = status
        super().__init__(message)
