"""Offline chat-completions replay server for testing the full LLM path.

The server speaks the same wire shape as a real provider and answers from
a script of canned entries. An entry either carries a `key` — the SHA-256
of the request's base64 image payload, so answers follow images even under
concurrent submission — or is unkeyed and consumed in script order.
Non-200 entries replay rate limits and server failures.
"""

from __future__ import annotations

import hashlib
import json
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Iterator, Sequence

from ..errors import ValidationError
from .encode import encode_image


@dataclass(frozen=True)
class ReplayEntry:
    content: str = ""
    status: int = 200
    key: str | None = None


def image_key_for_payload(payload_b64: str) -> str:
    """Replay key for a request: SHA-256 hex digest of the base64 payload."""
    return hashlib.sha256(payload_b64.encode("ascii")).hexdigest()


def image_key_for_file(path: str | Path) -> str:
    payload, _ = encode_image(path)
    return image_key_for_payload(payload)


def write_script(entries: Sequence[ReplayEntry], path: str | Path) -> None:
    with Path(path).open("w") as fh:
        for entry in entries:
            record: dict = {"status": entry.status, "content": entry.content}
            if entry.key is not None:
                record["key"] = entry.key
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def load_script(path: str | Path) -> list[ReplayEntry]:
    path = Path(path)
    entries = []
    with path.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                entries.append(
                    ReplayEntry(
                        content=obj.get("content", ""),
                        status=int(obj.get("status", 200)),
                        key=obj.get("key"),
                    )
                )
            except (json.JSONDecodeError, ValueError) as exc:
                raise ValidationError(f"{path}:{lineno}: bad script line: {exc}") from None
    if not entries:
        raise ValidationError(f"{path}: replay script is empty")
    return entries


def _extract_image_payload(body: dict) -> str | None:
    for message in body.get("messages", []):
        content = message.get("content")
        if not isinstance(content, list):
            continue
        for part in content:
            if part.get("type") == "image_url":
                url = part.get("image_url", {}).get("url", "")
                if "base64," in url:
                    return url.split("base64,", 1)[1]
    return None


class _ReplayState:
    def __init__(self, entries: Sequence[ReplayEntry]):
        self.keyed = {e.key: e for e in entries if e.key is not None}
        self.sequential = [e for e in entries if e.key is None]
        self.cursor = 0
        self.lock = threading.Lock()
        self.request_count = 0

    def next_entry(self, key: str | None) -> ReplayEntry | None:
        with self.lock:
            self.request_count += 1
            if key is not None and key in self.keyed:
                return self.keyed[key]
            if self.cursor < len(self.sequential):
                entry = self.sequential[self.cursor]
                self.cursor += 1
                return entry
            return None


class _Handler(BaseHTTPRequestHandler):
    state: _ReplayState  # set on the server class

    def do_POST(self):  # noqa: N802 (http.server API)
        if not self.path.endswith("/chat/completions"):
            self._respond(404, {"error": {"message": f"unknown path {self.path}"}})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            body = json.loads(self.rfile.read(length))
        except (ValueError, json.JSONDecodeError):
            self._respond(400, {"error": {"message": "request body is not JSON"}})
            return

        payload = _extract_image_payload(body)
        key = image_key_for_payload(payload) if payload is not None else None
        entry = self.server.state.next_entry(key)  # type: ignore[attr-defined]
        if entry is None:
            self._respond(404, {"error": {"message": "no matching replay entry"}})
            return
        if entry.status != 200:
            self._respond(entry.status, {"error": {"message": f"scripted {entry.status}"}})
            return
        self._respond(
            200,
            {
                "id": "replay",
                "object": "chat.completion",
                "choices": [
                    {
                        "index": 0,
                        "message": {"role": "assistant", "content": entry.content},
                        "finish_reason": "stop",
                    }
                ],
            },
        )

    def _respond(self, status: int, payload: dict):
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, fmt, *args):  # quiet by default
        pass


def make_server(entries: Sequence[ReplayEntry], port: int = 0) -> ThreadingHTTPServer:
    server = ThreadingHTTPServer(("127.0.0.1", port), _Handler)
    server.state = _ReplayState(entries)  # type: ignore[attr-defined]
    return server


@contextmanager
def run_mock_server(entries: Sequence[ReplayEntry], port: int = 0) -> Iterator[str]:
    """Serve the script on a background thread, yielding the base URL."""
    server = make_server(entries, port)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_address[1]}"
    finally:
        server.shutdown()
        server.server_close()
        thread.join(timeout=5)


def serve_script(path: str | Path, port: int) -> None:
    """Blocking server for the CLI; runs until interrupted."""
    server = make_server(load_script(path), port)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
