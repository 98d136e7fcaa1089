"""TCP wire protocol: length-prefixed (4-byte big-endian) UTF-8 JSON.

Requests carry a ``type`` of HELLO, POLL, HEARTBEAT, COMPLETE, or REPORT;
the response to POLL is an ASSIGN message with a job list, all other
responses are plain ``{"ok": ...}`` objects.
"""
from __future__ import annotations

import json
import socket
import socketserver
import struct
import threading

from .jobs import FarmError, ProtocolError, RenderJob

__all__ = [
    "CoordinatorClient",
    "CoordinatorServer",
    "recv_message",
    "send_message",
    "start_server",
]

MAX_MESSAGE_BYTES = 64 * 1024 * 1024


def send_message(sock: socket.socket, message: dict) -> None:
    payload = json.dumps(message, separators=(",", ":"),
                         ensure_ascii=False).encode("utf-8")
    if len(payload) > MAX_MESSAGE_BYTES:
        raise ProtocolError(f"message too large: {len(payload)} bytes")
    sock.sendall(struct.pack(">I", len(payload)) + payload)


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    chunks = []
    remaining = n
    while remaining > 0:
        chunk = sock.recv(remaining)
        if not chunk:
            if remaining == n and not chunks:
                return None  # clean EOF between messages
            raise ProtocolError("connection closed mid-message")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def recv_message(sock: socket.socket) -> dict | None:
    header = _recv_exact(sock, 4)
    if header is None:
        return None
    (length,) = struct.unpack(">I", header)
    if length > MAX_MESSAGE_BYTES:
        raise ProtocolError(f"declared message size too large: {length}")
    payload = _recv_exact(sock, length)
    if payload is None:
        raise ProtocolError("connection closed mid-message")
    try:
        message = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"malformed message payload: {exc}")
    if not isinstance(message, dict):
        raise ProtocolError("message must be a JSON object")
    return message


class _SessionHandler(socketserver.BaseRequestHandler):
    def handle(self) -> None:
        while True:
            try:
                message = recv_message(self.request)
            except ProtocolError:
                return
            if message is None:
                return
            send_message(self.request, self.server.dispatch(message))


class CoordinatorServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, coordinator, address=("127.0.0.1", 0)):
        super().__init__(address, _SessionHandler)
        self.coordinator = coordinator

    def dispatch(self, message: dict) -> dict:
        try:
            return self._dispatch(message)
        except (ProtocolError, FarmError) as exc:
            return {"ok": False, "error": str(exc)}
        except KeyError as exc:
            return {"ok": False, "error": f"missing message field: {exc}"}

    def _dispatch(self, message: dict) -> dict:
        mtype = message.get("type")
        coord = self.coordinator
        if mtype == "HELLO":
            coord.hello(message["worker_id"], int(message["capacity"]))
            return {"ok": True}
        if mtype == "POLL":
            jobs = coord.assign(message["worker_id"])
            return {"type": "ASSIGN", "ok": True,
                    "jobs": [job.as_dict() for job in jobs]}
        if mtype == "HEARTBEAT":
            coord.heartbeat(message["worker_id"])
            return {"ok": True}
        if mtype == "COMPLETE":
            accepted = coord.complete(
                message["worker_id"], message["job_id"], message["status"],
                message.get("detail", ""))
            return {"ok": True, "accepted": accepted}
        if mtype == "REPORT":
            batch_id = message["batch_id"]
            report = coord.batch_report(batch_id)
            counts = coord.counts(batch_id)
            payload = report.as_dict()
            payload["counts"] = {state.value: n for state, n in counts.items()}
            payload["ok"] = True
            return payload
        return {"ok": False, "error": f"unsupported message type: {mtype!r}"}


def start_server(coordinator, host: str = "127.0.0.1",
                 port: int = 0) -> tuple[CoordinatorServer, threading.Thread]:
    server = CoordinatorServer(coordinator, (host, port))
    thread = threading.Thread(target=server.serve_forever,
                              name="farm-coordinator", daemon=True)
    thread.start()
    return server, thread


class CoordinatorClient:
    """Blocking request/response client for one worker or status session."""

    def __init__(self, host: str, port: int, timeout: float = 30.0):
        self._sock = socket.create_connection((host, port), timeout=timeout)

    def close(self) -> None:
        self._sock.close()

    def __enter__(self) -> "CoordinatorClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _call(self, message: dict) -> dict:
        send_message(self._sock, message)
        response = recv_message(self._sock)
        if response is None:
            raise ProtocolError("coordinator closed the connection")
        if not response.get("ok", False):
            raise ProtocolError(response.get("error", "request failed"))
        return response

    def hello(self, worker_id: str, capacity: int) -> None:
        self._call({"type": "HELLO", "worker_id": worker_id,
                    "capacity": capacity})

    def poll(self, worker_id: str) -> list[RenderJob]:
        response = self._call({"type": "POLL", "worker_id": worker_id})
        return [RenderJob.from_dict(raw) for raw in response.get("jobs", [])]

    def heartbeat(self, worker_id: str) -> None:
        self._call({"type": "HEARTBEAT", "worker_id": worker_id})

    def complete(self, worker_id: str, job_id: str, status: str,
                 detail: str = "") -> bool:
        response = self._call({"type": "COMPLETE", "worker_id": worker_id,
                               "job_id": job_id, "status": status,
                               "detail": detail})
        return bool(response.get("accepted", False))

    def report(self, batch_id: str) -> dict:
        response = self._call({"type": "REPORT", "batch_id": batch_id})
        response.pop("ok", None)
        return response
