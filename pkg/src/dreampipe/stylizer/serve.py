"""Serve a stylizer backend over HTTP or stdio.

The HTTP server answers POST /stylize with the protocol's JSON bodies; the
stdio server reads one request JSON per line and writes one response JSON per
line. Failures inside the backend are reported as ``{"error": ...}`` payloads
instead of killing the server.
"""

from __future__ import annotations

import logging
import sys
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .protocol import StylizeRequest, error_json

log = logging.getLogger(__name__)


def _respond(backend, text: str) -> str:
    try:
        request = StylizeRequest.from_json(text)
        return backend.handle(request).to_json()
    except Exception as e:  # backend errors become protocol errors
        log.warning("stylize request failed: %s", e)
        return error_json(str(e))


def make_http_server(backend, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    """Build (but do not start) the server; ``server_address[1]`` carries the
    bound port, useful with port 0."""

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self) -> None:  # noqa: N802 (http.server API)
            if self.path.rstrip("/") != "/stylize":
                self.send_error(404, "only /stylize exists here")
                return
            length = int(self.headers.get("Content-Length", 0))
            body = self.rfile.read(length).decode("utf-8")
            payload = _respond(backend, body).encode("utf-8")
            status = 200 if not payload.startswith(b'{"error"') else 422
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        def log_message(self, fmt, *args) -> None:
            log.debug("http: " + fmt, *args)

    return ThreadingHTTPServer((host, port), Handler)


def serve_http(backend, host: str = "127.0.0.1", port: int = 8808) -> None:
    server = make_http_server(backend, host, port)
    log.info("stylizer listening on http://%s:%d/stylize", *server.server_address)
    try:
        server.serve_forever()
    finally:
        server.server_close()


def serve_stdio(backend, stdin=None, stdout=None) -> None:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        stdout.write(_respond(backend, line) + "\n")
        stdout.flush()
