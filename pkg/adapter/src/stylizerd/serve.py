"""HTTP and stdio front ends for the service.

HTTP: POST /stylize carries one request JSON and answers with the response
JSON (200 on success, 422/413/503/500 error payloads otherwise); GET
/health answers a small status document; everything else is 404. stdio:
one request JSON per line on stdin, one response JSON per line on stdout,
errors as error payloads so a bad request never kills the stream.
"""

from __future__ import annotations

import json
import logging
import sys
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .service import AdapterService

log = logging.getLogger(__name__)


def make_http_server(service: AdapterService, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    """Build (but do not start) the server; ``server_address[1]`` carries
    the bound port, useful with port 0."""

    class Handler(BaseHTTPRequestHandler):
        def _reply(self, status: int, payload: bytes) -> None:
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        def do_POST(self) -> None:  # noqa: N802 (http.server API)
            if self.path.rstrip("/") != "/stylize":
                self.send_error(404, "only /stylize accepts requests")
                return
            length = int(self.headers.get("Content-Length", 0))
            body = self.rfile.read(length).decode("utf-8")
            payload, status = service.handle(body)
            self._reply(status, payload.encode("utf-8"))

        def do_GET(self) -> None:  # noqa: N802 (http.server API)
            if self.path.rstrip("/") != "/health":
                self.send_error(404, "only /health answers GET")
                return
            self._reply(200, json.dumps(service.describe()).encode("utf-8"))

        def log_message(self, fmt, *args) -> None:
            log.debug("http: " + fmt, *args)

    return ThreadingHTTPServer((host, port), Handler)


def serve_http(service: AdapterService, host: str = "127.0.0.1", port: int = 8790) -> None:
    server = make_http_server(service, host, port)
    log.info("stylizer backend listening on http://%s:%d/stylize", *server.server_address)
    try:
        server.serve_forever()
    finally:
        server.server_close()


def serve_stdio(service: AdapterService, stdin=None, stdout=None) -> None:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        payload, _ = service.handle(line)
        stdout.write(payload + "\n")
        stdout.flush()
