"""A scripted completion/fine-tune HTTP service running in a background thread."""

import json
import threading
from collections import defaultdict, deque
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer


class FakeService:
    def __init__(self):
        self.scripts: dict[tuple[str, str], deque] = defaultdict(deque)
        self.calls: list[dict] = []
        self.completion_text = lambda prompt: " This given sentence represents neither belong nor burden"
        self._lock = threading.Lock()
        service = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _handle(self, method):
                length = int(self.headers.get("Content-Length") or 0)
                raw = self.rfile.read(length) if length else b""
                with service._lock:
                    service.calls.append({"method": method, "path": self.path, "headers": dict(self.headers), "body": raw})
                    queue = service.scripts.get((method, self.path))
                    scripted = queue.popleft() if queue else None
                status, body, headers = scripted or service.default(method, self.path, raw)
                payload = json.dumps(body).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                for key, value in (headers or {}).items():
                    self.send_header(key, value)
                self.end_headers()
                self.wfile.write(payload)

            def do_GET(self):
                self._handle("GET")

            def do_POST(self):
                self._handle("POST")

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, kwargs={"poll_interval": 0.02}, daemon=True)

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self.server.server_address[1]}/v1"

    def script(self, method, path, *responses):
        for response in responses:
            status, body, *rest = response
            self.scripts[(method, "/v1" + path)].append((status, body, rest[0] if rest else None))

    def default(self, method, path, raw):
        if method == "POST" and path.endswith("/completions"):
            prompt = json.loads(raw)["prompt"]
            return 200, {"choices": [{"text": self.completion_text(prompt)}],
                         "usage": {"prompt_tokens": 3, "completion_tokens": 5}}, None
        return 404, {"error": {"message": f"no route {method} {path}"}}, None

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()
