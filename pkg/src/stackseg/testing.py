"""In-process echo server for the propagation wire protocol.

Implements the identity rule (every predicted mask equals the prompt), which
makes remote results directly comparable to IdentityPropagator output. Fault
injection knobs simulate misbehaving backends: dropping the connection at a
given frame, or answering with a wrong-shaped mask.
"""

import json
import threading
import uuid
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .errors import ProtocolError
from .protocol import DONE_PAYLOAD, next_payload, parse_propagation_request


class EchoPropagationServer:
    """Threaded loopback server. Use as a context manager:

        with EchoPropagationServer() as url:
            prop = remote_propagator(url)
    """

    def __init__(self, drop_at_step: int | None = None, wrong_shape_at_step: int | None = None):
        self.drop_at_step = drop_at_step
        self.wrong_shape_at_step = wrong_shape_at_step
        self._streams: dict[str, dict] = {}
        self._lock = threading.Lock()
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):  # keep test output quiet
                pass

            def _send_json(self, code: int, payload: dict):
                body = json.dumps(payload).encode()
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_POST(self):
                if self.path != "/v1/propagation":
                    self._send_json(404, {"code": "not_found", "message": self.path})
                    return
                length = int(self.headers.get("Content-Length", 0))
                try:
                    body = json.loads(self.rfile.read(length))
                    indices, frames, _, prompt_mask, _ = parse_propagation_request(body)
                except (ProtocolError, json.JSONDecodeError) as exc:
                    self._send_json(400, {"code": "bad_request", "message": str(exc)})
                    return
                stream_id = uuid.uuid4().hex
                with outer._lock:
                    outer._streams[stream_id] = {
                        "indices": indices,
                        "mask": prompt_mask,
                        "pos": 1,
                    }
                self._send_json(200, {"stream_id": stream_id})

            def do_GET(self):
                parts = self.path.strip("/").split("/")
                if len(parts) != 4 or parts[:2] != ["v1", "propagation"] or parts[3] != "next":
                    self._send_json(404, {"code": "not_found", "message": self.path})
                    return
                with outer._lock:
                    stream = outer._streams.get(parts[2])
                if stream is None:
                    self._send_json(404, {"code": "unknown_stream", "message": parts[2]})
                    return
                pos = stream["pos"]
                if pos >= len(stream["indices"]):
                    self._send_json(200, DONE_PAYLOAD)
                    return
                if outer.drop_at_step is not None and pos >= outer.drop_at_step:
                    # simulate a dying backend: close without a response
                    self.connection.close()
                    return
                mask = stream["mask"]
                if outer.wrong_shape_at_step is not None and pos >= outer.wrong_shape_at_step:
                    mask = np.zeros((mask.shape[0] + 1, mask.shape[1]), dtype=np.uint8)
                stream["pos"] = pos + 1
                self._send_json(200, next_payload(stream["indices"][pos], mask))

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> str:
        self._thread.start()
        return self.url

    def stop(self):
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self) -> str:
        return self.start()

    def __exit__(self, *exc):
        self.stop()
