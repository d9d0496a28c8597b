"""Chunking, packing and the JSON envelope.

A payload is split into 256-byte chunks (the last one zero padded), each
chunk is reinterpreted as 32 little-endian 64-bit words, and those words
are exactly one bitsliced KATAN32 batch.  Padding is never removed by
inspection: the plaintext length rides alongside the ciphertext and is
authoritative, so payloads ending in zero bytes survive the round trip.

On the wire an encrypted payload travels as a JSON object with exactly
the fields device_id, seq, ts_ms, cipher, plaintext_len and payload,
where payload is standard base64 (with padding) of the ciphertext.
"""

from __future__ import annotations

import base64
import binascii
import json
import struct
from dataclasses import dataclass

from .baselines import cipher_names
from .errors import (
    BadBase64,
    BadCiphertextLength,
    BadLengthInvariant,
    BadPlaintextLen,
    EmptyInput,
    LengthOutOfRange,
    MalformedJson,
    MissingField,
    Oversize,
    UnknownCipher,
)
from .katan import Key80, broadcast_key, decrypt_batch, encrypt_batch

CHUNK_BYTES = 256
WORDS_PER_CHUNK = 32

_WORD_STRUCT = struct.Struct("<32Q")

ENVELOPE_FIELDS = ("device_id", "seq", "ts_ms", "cipher", "plaintext_len", "payload")


@dataclass(frozen=True)
class Chunk:
    """One padded 256-byte chunk and how many of its bytes are real."""

    data: bytes
    used_len: int

    def __post_init__(self):
        if len(self.data) != CHUNK_BYTES:
            raise ValueError(f"chunk data must be exactly {CHUNK_BYTES} bytes")
        if not 1 <= self.used_len <= CHUNK_BYTES:
            raise LengthOutOfRange(
                f"used_len must be in 1..{CHUNK_BYTES}, got {self.used_len}")


def chunk_stream(data: bytes) -> list:
    """Split ``data`` into padded chunks; only the last may be partial."""
    if not data:
        raise EmptyInput("cannot chunk an empty payload")
    out = []
    for start in range(0, len(data), CHUNK_BYTES):
        piece = data[start:start + CHUNK_BYTES]
        used = len(piece)
        out.append(Chunk(piece.ljust(CHUNK_BYTES, b"\x00"), used))
    return out


def pack_bytes(data: bytes) -> tuple:
    """256 (or fewer, zero padded) bytes -> 32 little-endian words."""
    if len(data) > CHUNK_BYTES:
        raise Oversize(f"chunk of {len(data)} bytes exceeds {CHUNK_BYTES}")
    return _WORD_STRUCT.unpack(data.ljust(CHUNK_BYTES, b"\x00"))


def unpack_words(words, used_len: int) -> bytes:
    """Inverse of pack_bytes, keeping only the first ``used_len`` bytes."""
    if not 0 <= used_len <= CHUNK_BYTES:
        raise LengthOutOfRange(
            f"used_len must be in 0..{CHUNK_BYTES}, got {used_len}")
    return _WORD_STRUCT.pack(*words)[:used_len]


def _plaintext_len_bounds(ciphertext_len: int) -> tuple:
    chunks = ciphertext_len // CHUNK_BYTES
    return (chunks - 1) * CHUNK_BYTES + 1, chunks * CHUNK_BYTES


def encrypt_payload(data: bytes, key: Key80) -> tuple:
    """Encrypt a payload; returns (ciphertext, plaintext_len).

    The ciphertext is always a whole number of 256-byte chunks.
    """
    if not data:
        raise EmptyInput("cannot encrypt an empty payload")
    words_key = broadcast_key(key)
    out = bytearray()
    for chunk in chunk_stream(data):
        out += _WORD_STRUCT.pack(*encrypt_batch(pack_bytes(chunk.data), words_key))
    return bytes(out), len(data)


def decrypt_payload(ciphertext: bytes, plaintext_len: int, key: Key80) -> bytes:
    """Decrypt and trim back to exactly ``plaintext_len`` bytes."""
    n = len(ciphertext)
    if n == 0 or n % CHUNK_BYTES:
        raise BadCiphertextLength(
            f"ciphertext length {n} is not a positive multiple of {CHUNK_BYTES}")
    lo, hi = _plaintext_len_bounds(n)
    if not isinstance(plaintext_len, int) or not lo <= plaintext_len <= hi:
        raise BadPlaintextLen(
            f"plaintext_len {plaintext_len} impossible for {n} ciphertext bytes")
    words_key = broadcast_key(key)
    out = bytearray()
    for start in range(0, n, CHUNK_BYTES):
        words = _WORD_STRUCT.unpack(ciphertext[start:start + CHUNK_BYTES])
        out += _WORD_STRUCT.pack(*decrypt_batch(words, words_key))
    return bytes(out[:plaintext_len])


@dataclass(frozen=True)
class Envelope:
    """One ingest message, decoded."""

    device_id: str
    seq: int
    ts_ms: int
    cipher: str
    plaintext_len: int
    ciphertext: bytes


def _check_envelope(env: Envelope) -> None:
    if not isinstance(env.device_id, str) or not env.device_id:
        raise MissingField("device_id must be a non-empty string")
    for name in ("seq", "ts_ms", "plaintext_len"):
        value = getattr(env, name)
        if isinstance(value, bool) or not isinstance(value, int) or value < 0:
            raise MissingField(f"{name} must be a non-negative integer")
    if not isinstance(env.cipher, str):
        raise MissingField("cipher must be a string")
    if env.cipher not in cipher_names():
        raise UnknownCipher(f"unknown cipher {env.cipher!r}")
    n = len(env.ciphertext)
    if n == 0 or n % CHUNK_BYTES:
        raise BadLengthInvariant(
            f"payload of {n} bytes is not a whole number of chunks")
    lo, hi = _plaintext_len_bounds(n)
    if not lo <= env.plaintext_len <= hi:
        raise BadPlaintextLen(
            f"plaintext_len {env.plaintext_len} impossible for {n} payload bytes")


def encode_envelope(env: Envelope) -> str:
    """Serialize an envelope to its canonical JSON form."""
    _check_envelope(env)
    return json.dumps({
        "device_id": env.device_id,
        "seq": env.seq,
        "ts_ms": env.ts_ms,
        "cipher": env.cipher,
        "plaintext_len": env.plaintext_len,
        "payload": base64.b64encode(env.ciphertext).decode("ascii"),
    })


def decode_envelope(text) -> Envelope:
    """Parse and validate one envelope; the field set is closed."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError:
            raise MalformedJson("body is not valid UTF-8") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError:
        raise MalformedJson("body is not valid JSON") from None
    if not isinstance(obj, dict):
        raise MalformedJson("envelope must be a JSON object")
    for name in ENVELOPE_FIELDS:
        if name not in obj:
            raise MissingField(f"envelope is missing {name!r}")
    extras = set(obj) - set(ENVELOPE_FIELDS)
    if extras:
        raise MalformedJson(f"unexpected fields: {sorted(extras)}")
    if not isinstance(obj["payload"], str):
        raise MissingField("payload must be a string")
    try:
        ciphertext = base64.b64decode(obj["payload"], validate=True)
    except (binascii.Error, ValueError):
        raise BadBase64("payload is not valid base64") from None
    env = Envelope(
        device_id=obj["device_id"],
        seq=obj["seq"],
        ts_ms=obj["ts_ms"],
        cipher=obj["cipher"],
        plaintext_len=obj["plaintext_len"],
        ciphertext=ciphertext,
    )
    _check_envelope(env)
    return env
