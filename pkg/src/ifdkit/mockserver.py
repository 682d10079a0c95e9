"""Scripted chat-completions server for offline tests and demos.

Each POST consumes the next scripted response; once the script is used up
the last entry repeats. Every request is recorded (headers and raw body).
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer


@dataclass(frozen=True)
class MockResponse:
    status: int = 200
    text: str = ""
    body: bytes | None = None  # raw override of the generated chat payload

    def payload(self) -> bytes:
        if self.body is not None:
            return self.body
        if self.status != 200:
            return json.dumps({"error": {"message": f"mock status {self.status}"}}).encode()
        return json.dumps({
            "id": "mock", "object": "chat.completion",
            "choices": [{"index": 0, "message": {"role": "assistant", "content": self.text},
                         "finish_reason": "stop"}],
        }).encode()


@dataclass(frozen=True)
class RecordedRequest:
    path: str
    headers: dict
    body: bytes


@dataclass
class MockChatServer:
    responses: list[MockResponse] = field(default_factory=list)
    requests: list[RecordedRequest] = field(default_factory=list)

    def __post_init__(self):
        self._lock = threading.Lock()
        self._server: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    @classmethod
    def replying(cls, *texts: str) -> MockChatServer:
        return cls([MockResponse(200, t) for t in texts])

    def _next(self, request: RecordedRequest) -> MockResponse:
        with self._lock:
            self.requests.append(request)
            i = len(self.requests) - 1
            if not self.responses:
                return MockResponse(200, "")
            return self.responses[min(i, len(self.responses) - 1)]

    def start(self) -> str:
        owner = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                n = int(self.headers.get("Content-Length", 0))
                body = self.rfile.read(n)
                resp = owner._next(RecordedRequest(self.path, dict(self.headers.items()), body))
                data = resp.payload()
                self.send_response(resp.status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, format, *args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self.url

    @property
    def url(self) -> str:
        assert self._server is not None, "server not started"
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None

    def __enter__(self) -> MockChatServer:
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.stop()
