"""Tiny configurable HTTP server for exercising the HTTP backends in tests."""
from __future__ import annotations

import json
import threading
import time
from contextlib import contextmanager
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer


class StubBehavior:
    """Mutable knobs shared between a test and its stub server."""

    def __init__(
        self,
        candidates: list[str] | None = None,
        model_id: str = "stub-model",
        status: int = 200,
        delay: float = 0.0,
        raw_body: bytes | None = None,
        echo_num_candidates: bool = False,
        finetune_status: int = 200,
        finetune_ack: str = "ok-123",
        finetune_echo: bool = True,
        fail_first: int = 0,
    ):
        self.candidates = candidates or []
        self.model_id = model_id
        self.status = status
        self.delay = delay
        self.raw_body = raw_body
        self.echo_num_candidates = echo_num_candidates
        self.finetune_status = finetune_status
        self.finetune_ack = finetune_ack
        self.finetune_echo = finetune_echo
        self.requests: list[dict] = []
        self.request_ids: list[str] = []
        self.fail_first = fail_first  # drop this many connections before answering


def make_handler(behavior: StubBehavior):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):  # keep test output quiet
            pass

        def _reply(self, status: int, payload: dict | None = None, raw: bytes | None = None):
            body = raw if raw is not None else json.dumps(payload or {}).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            if self.path == "/health":
                if behavior.status == 200:
                    self._reply(200, {"status": "ok", "model_id": behavior.model_id})
                else:
                    self._reply(behavior.status, {"status": "unavailable"})
            else:
                self._reply(404, {"error": "not found"})

        def do_POST(self):
            length = int(self.headers.get("Content-Length", "0"))
            raw = self.rfile.read(length)
            try:
                request = json.loads(raw)
            except json.JSONDecodeError:
                self._reply(400, {"error": "malformed"})
                return
            behavior.requests.append({"path": self.path, "body": request})
            behavior.request_ids.append(self.headers.get("X-Request-Id", ""))
            if behavior.fail_first > 0:
                behavior.fail_first -= 1
                self.connection.close()
                return
            if behavior.delay:
                time.sleep(behavior.delay)
            if self.path == "/generate":
                if behavior.raw_body is not None:
                    self._reply(200, raw=behavior.raw_body)
                    return
                if behavior.status != 200:
                    self._reply(behavior.status, {"error": "unavailable"})
                    return
                candidates = behavior.candidates
                if behavior.echo_num_candidates:
                    n = request["num_candidates"]
                    candidates = [f"candidate {i} for {request['input'][:20]}" for i in range(n)]
                self._reply(200, {"candidates": candidates, "model_id": behavior.model_id})
            elif self.path == "/finetune":
                if behavior.finetune_status != 200:
                    self._reply(behavior.finetune_status, {"error": "no"})
                    return
                received = request.get("record_count") if behavior.finetune_echo else -1
                self._reply(200, {"ack": behavior.finetune_ack, "received_records": received})
            else:
                self._reply(404, {"error": "not found"})

    return Handler


@contextmanager
def run_stub(behavior: StubBehavior):
    server = ThreadingHTTPServer(("127.0.0.1", 0), make_handler(behavior))
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_address[1]}"
    finally:
        server.shutdown()
        server.server_close()
