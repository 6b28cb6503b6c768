"""Small shared plumbing for the stdlib HTTP servers.

Both the ingest server and the simulator control surface are tiny local
services, so they share one threaded-handler base instead of pulling in a
web framework. CORS is wide open: the dashboard is served from a different
origin (a static file server) and talks to both services from the browser.
"""

from __future__ import annotations

import json
import logging
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

logger = logging.getLogger(__name__)


class ApiHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "aqnet"
    timeout = 30  # reap idle keep-alive connections

    def log_message(self, format: str, *args) -> None:  # quiet by default
        logger.debug("%s - %s", self.address_string(), format % args)

    def end_headers(self) -> None:
        self.send_header("Access-Control-Allow-Origin", "*")
        if getattr(self.server, "closing", False):
            self.send_header("Connection", "close")
            self.close_connection = True
        super().end_headers()

    def do_OPTIONS(self) -> None:  # CORS preflight
        self.send_response(204)
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type, X-Admin-Key")
        self.send_header("Content-Length", "0")
        self.end_headers()

    def send_body(self, status: int, body: bytes, content_type: str) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def send_text(self, status: int, text: str) -> None:
        self.send_body(status, text.encode("utf-8"), "text/plain; charset=utf-8")

    def send_json(self, status: int, obj) -> None:
        self.send_body(status, json.dumps(obj).encode("utf-8"), "application/json")

    def send_json_error(self, status: int, message: str) -> None:
        self.send_json(status, {"error": message})

    def read_json_body(self):
        """Parse the request body as JSON; None when absent or malformed."""
        try:
            length = int(self.headers.get("Content-Length", "0"))
        except ValueError:
            return None
        if length <= 0:
            return None
        raw = self.rfile.read(length)
        try:
            return json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            return None


class ApiServer(ThreadingHTTPServer):
    """ThreadingHTTPServer with non-blocking close.

    ``server_close`` must not wait on handler threads parked in keep-alive
    reads, so threads are daemons and are not joined; ``closing`` makes every
    in-flight response carry ``Connection: close`` so lingering connections
    drain promptly during shutdown.
    """

    daemon_threads = True
    block_on_close = False
    allow_reuse_address = True
    closing = False

    def begin_shutdown(self) -> None:
        self.closing = True
        self.shutdown()
        self.server_close()
