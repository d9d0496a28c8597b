"""Ingest service and client for ciphertext-at-rest telemetry.

The server accepts JSON envelopes over HTTP, validates them, and appends
the decoded ciphertext to a per-device ``.bin`` file plus one line per
message in a ``.meta`` file.  Nothing in this module can decrypt: no key
ever reaches the server, and stored bytes are exactly the ciphertext
that arrived.  Appends are serialized per device and fsynced before the
request is acknowledged.

Routes:

* ``POST /api/v1/ingest`` -> ``{"status": "ok", "stored": N}`` on 200,
  ``{"status": "rejected", "reason": ...}`` on 400/413/500
* ``GET /api/v1/devices/{id}/blob`` -> raw stored ciphertext
* ``GET /api/v1/devices/{id}/meta`` -> one ``seq ts_ms plaintext_len
  offset length`` line per message
* ``GET /health`` -> ``ok``
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import unquote

import requests

from .codec import Envelope, chunk_stream, decode_envelope, encode_envelope, encrypt_payload
from .errors import (
    BadDeviceId,
    ConnectionFailed,
    EmptyInput,
    KatanPipeError,
    PayloadTooLarge,
    ServerRejected,
    UnknownDevice,
)
from .katan import Key80

API_PREFIX = "/api/v1"
DEFAULT_MAX_DECODED = 1 << 20
DEFAULT_RETRIES = 3
DEFAULT_BACKOFF_S = 0.25

_log = logging.getLogger(__name__)

# Kept to a filesystem-safe alphabet because the id becomes a filename.
_DEVICE_ID_RE = re.compile(r"[A-Za-z0-9._-]{1,64}\Z")

_BLOB_RE = re.compile(rf"{API_PREFIX}/devices/([^/]+)/blob\Z")
_META_RE = re.compile(rf"{API_PREFIX}/devices/([^/]+)/meta\Z")


def now_ms() -> int:
    return int(time.time() * 1000)


def check_device_id(device_id) -> str:
    """Return the id unchanged, or raise BadDeviceId."""
    if not isinstance(device_id, str) or not _DEVICE_ID_RE.fullmatch(device_id):
        raise BadDeviceId(
            "device_id must be 1..64 characters from [A-Za-z0-9._-]")
    return device_id


@dataclass(frozen=True)
class MetaRecord:
    """One stored message: where it sits in the blob and what it claims."""

    seq: int
    ts_ms: int
    plaintext_len: int
    offset: int
    length: int

    def line(self) -> str:
        return f"{self.seq} {self.ts_ms} {self.plaintext_len} {self.offset} {self.length}"

    @classmethod
    def parse(cls, line: str) -> "MetaRecord":
        parts = line.split()
        if len(parts) != 5:
            raise ValueError(f"meta line needs 5 fields: {line!r}")
        seq, ts_ms, plaintext_len, offset, length = (int(p) for p in parts)
        return cls(seq, ts_ms, plaintext_len, offset, length)


class BlobStore:
    """Append-only per-device ciphertext files under one root directory."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._locks = {}
        self._locks_guard = threading.Lock()

    def _lock_for(self, device_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(device_id, threading.Lock())

    def _bin_path(self, device_id: str) -> Path:
        return self.root / f"{device_id}.bin"

    def _meta_path(self, device_id: str) -> Path:
        return self.root / f"{device_id}.meta"

    def append(self, device_id: str, ciphertext: bytes, *,
               seq: int, ts_ms: int, plaintext_len: int) -> MetaRecord:
        """Durably append one message; returns its meta record."""
        check_device_id(device_id)
        with self._lock_for(device_id):
            with open(self._bin_path(device_id), "ab") as f:
                offset = f.tell()
                f.write(ciphertext)
                f.flush()
                os.fsync(f.fileno())
            record = MetaRecord(seq, ts_ms, plaintext_len, offset, len(ciphertext))
            with open(self._meta_path(device_id), "a", encoding="ascii") as f:
                f.write(record.line() + "\n")
                f.flush()
                os.fsync(f.fileno())
        return record

    def fetch_blob(self, device_id: str) -> bytes:
        check_device_id(device_id)
        path = self._bin_path(device_id)
        if not path.exists():
            raise UnknownDevice(f"no blob stored for {device_id!r}")
        with self._lock_for(device_id):
            return path.read_bytes()

    def fetch_meta(self, device_id: str) -> list:
        check_device_id(device_id)
        path = self._meta_path(device_id)
        if not path.exists():
            raise UnknownDevice(f"no meta stored for {device_id!r}")
        with self._lock_for(device_id):
            text = path.read_text(encoding="ascii")
        return [MetaRecord.parse(line) for line in text.splitlines() if line.strip()]


@dataclass(frozen=True)
class IngestResult:
    """Outcome of one ingest attempt, independent of HTTP."""

    ok: bool
    stored: int = 0
    reason: str = ""
    status: int = 200


def ingest(store: BlobStore, body,
           max_decoded: int = DEFAULT_MAX_DECODED) -> IngestResult:
    """Validate one envelope body and append its ciphertext to the store."""
    try:
        env = decode_envelope(body)
        check_device_id(env.device_id)
        if len(env.ciphertext) > max_decoded:
            raise PayloadTooLarge(
                f"decoded payload of {len(env.ciphertext)} bytes "
                f"exceeds the {max_decoded} byte limit")
        store.append(env.device_id, env.ciphertext,
                     seq=env.seq, ts_ms=env.ts_ms,
                     plaintext_len=env.plaintext_len)
    except PayloadTooLarge as exc:
        return IngestResult(False, 0, exc.reason, 413)
    except KatanPipeError as exc:
        return IngestResult(False, 0, exc.reason, 400)
    except OSError:
        _log.exception("storage failure during ingest")
        return IngestResult(False, 0, "StorageFailure", 500)
    return IngestResult(True, len(env.ciphertext), "", 200)


class _Handler(BaseHTTPRequestHandler):
    server_version = "katanpipe/0.1"
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):
        _log.debug("%s " + fmt, self.address_string(), *args)

    def _send(self, status: int, body: bytes, content_type: str) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, status: int, obj) -> None:
        self._send(status, json.dumps(obj).encode("ascii"), "application/json")

    def _reject(self, status: int, reason: str) -> None:
        # The request body may not have been drained, so do not let the
        # connection be reused.
        self.close_connection = True
        self._send_json(status, {"status": "rejected", "reason": reason})

    def do_GET(self):
        if self.path == "/health":
            self._send(200, b"ok", "text/plain")
            return
        m = _BLOB_RE.fullmatch(self.path)
        if m:
            self._get_blob(unquote(m.group(1)))
            return
        m = _META_RE.fullmatch(self.path)
        if m:
            self._get_meta(unquote(m.group(1)))
            return
        self._reject(404, "NotFound")

    def _get_blob(self, device_id: str) -> None:
        try:
            blob = self.server.store.fetch_blob(device_id)
        except UnknownDevice as exc:
            self._reject(404, exc.reason)
            return
        except BadDeviceId as exc:
            self._reject(400, exc.reason)
            return
        self._send(200, blob, "application/octet-stream")

    def _get_meta(self, device_id: str) -> None:
        try:
            records = self.server.store.fetch_meta(device_id)
        except UnknownDevice as exc:
            self._reject(404, exc.reason)
            return
        except BadDeviceId as exc:
            self._reject(400, exc.reason)
            return
        text = "".join(record.line() + "\n" for record in records)
        self._send(200, text.encode("ascii"), "text/plain")

    def do_POST(self):
        if self.path != f"{API_PREFIX}/ingest":
            self._reject(404, "NotFound")
            return
        try:
            length = int(self.headers.get("Content-Length") or 0)
        except ValueError:
            self._reject(400, "MalformedJson")
            return
        # Base64 inflates by 4/3, so this cap cannot reject a body whose
        # decoded payload would have been within max_decoded.
        raw_cap = self.server.max_decoded * 2 + 8192
        if length > raw_cap:
            self._reject(413, "PayloadTooLarge")
            return
        body = self.rfile.read(length)
        result = ingest(self.server.store, body, self.server.max_decoded)
        if result.ok:
            self._send_json(200, {"status": "ok", "stored": result.stored})
        else:
            self._reject(result.status, result.reason)


class IngestServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, addr, store: BlobStore, max_decoded: int):
        super().__init__(addr, _Handler)
        self.store = store
        self.max_decoded = max_decoded


def create_server(addr, store: BlobStore,
                  max_decoded: int = DEFAULT_MAX_DECODED) -> IngestServer:
    """Build (but do not start) the ingest HTTP server."""
    return IngestServer(addr, store, max_decoded)


@dataclass(frozen=True)
class IngestAck:
    """Server acknowledgement for one sent envelope."""

    seq: int
    stored: int


def _post_with_retry(session, url: str, body: str, *,
                     retries: int, backoff_s: float, timeout: float, sleep):
    delay = backoff_s
    for attempt in range(retries):
        try:
            resp = session.post(
                url, data=body.encode("utf-8"),
                headers={"Content-Type": "application/json"},
                timeout=timeout)
        except requests.RequestException as exc:
            if attempt == retries - 1:
                raise ConnectionFailed(
                    f"could not reach {url} after {retries} attempts: {exc}") from exc
            sleep(delay)
            delay *= 2
            continue
        if 200 <= resp.status_code < 300:
            return resp
        try:
            detail = resp.json().get("reason", "")
        except ValueError:
            detail = resp.text[:200]
        raise ServerRejected(resp.status_code, detail)
    raise ConnectionFailed(f"could not reach {url}")


def send_payload(server_url: str, device_id: str, key: Key80, data: bytes, *,
                 per_chunk: bool = False, cipher: str = "KATAN32",
                 retries: int = DEFAULT_RETRIES,
                 backoff_s: float = DEFAULT_BACKOFF_S,
                 timeout: float = 10.0, sleep=time.sleep,
                 session=None) -> list:
    """Encrypt ``data`` and post it to the ingest endpoint.

    By default the whole payload goes in one envelope; with
    ``per_chunk=True`` each 256-byte chunk is sent as its own envelope.
    Sequence numbers start at 0 for every call.  Returns one IngestAck
    per envelope, in send order.
    """
    if not data:
        raise EmptyInput("cannot send an empty payload")
    check_device_id(device_id)
    if per_chunk:
        units = [c.data[:c.used_len] for c in chunk_stream(data)]
    else:
        units = [data]
    url = f"{server_url.rstrip('/')}{API_PREFIX}/ingest"
    own_session = session is None
    if own_session:
        session = requests.Session()
    try:
        acks = []
        for seq, unit in enumerate(units):
            ciphertext, plaintext_len = encrypt_payload(unit, key)
            env = Envelope(device_id=device_id, seq=seq, ts_ms=now_ms(),
                           cipher=cipher, plaintext_len=plaintext_len,
                           ciphertext=ciphertext)
            resp = _post_with_retry(
                session, url, encode_envelope(env),
                retries=retries, backoff_s=backoff_s,
                timeout=timeout, sleep=sleep)
            try:
                stored = int(resp.json()["stored"])
            except (ValueError, KeyError, TypeError):
                raise ServerRejected(resp.status_code,
                                     "malformed acknowledgement") from None
            acks.append(IngestAck(seq, stored))
        return acks
    finally:
        if own_session:
            session.close()


def _get(server_url: str, path: str, timeout: float):
    url = f"{server_url.rstrip('/')}{path}"
    try:
        resp = requests.get(url, timeout=timeout)
    except requests.RequestException as exc:
        raise ConnectionFailed(f"could not reach {url}: {exc}") from exc
    if resp.status_code == 404:
        raise UnknownDevice(f"server has no data at {path}")
    if not 200 <= resp.status_code < 300:
        try:
            detail = resp.json().get("reason", "")
        except ValueError:
            detail = resp.text[:200]
        raise ServerRejected(resp.status_code, detail)
    return resp


def fetch_remote_blob(server_url: str, device_id: str, *,
                      timeout: float = 10.0) -> bytes:
    """Download the stored ciphertext blob for one device."""
    check_device_id(device_id)
    resp = _get(server_url, f"{API_PREFIX}/devices/{device_id}/blob", timeout)
    return resp.content


def fetch_remote_meta(server_url: str, device_id: str, *,
                      timeout: float = 10.0) -> list:
    """Download and parse the meta records for one device."""
    check_device_id(device_id)
    resp = _get(server_url, f"{API_PREFIX}/devices/{device_id}/meta", timeout)
    return [MetaRecord.parse(line) for line in resp.text.splitlines() if line.strip()]
