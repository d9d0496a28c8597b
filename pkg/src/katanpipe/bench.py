"""Throughput measurement and reporting.

Rates are in bits per second: a sample of B bytes over t seconds has
bps = 8*B/t, and Kb/s divides that by 1000 (decimal kilobit, not 1024).
Reported rates are rounded to two decimals, half away from zero.  The
send-rate helper answers "how many fixed-size chunks per second does a
target line rate correspond to".
"""

from __future__ import annotations

import math
import platform
import time
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from random import Random

from .baselines import CipherDescriptor, get_cipher
from .errors import (
    BadLength,
    EmptySamples,
    NonPositiveElapsed,
    NonPositiveInput,
)
from .katan import Key80
from .transport import send_payload

CSV_HEADER = "bytes,bits,elapsed_s,bps,kbps"
TABLE5_CSV_HEADER = "bytes,ms"


def round2(value: float) -> float:
    """Round to two decimals, half away from zero."""
    return float(Decimal(repr(float(value))).quantize(
        Decimal("0.01"), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class ThroughputSample:
    """One timed transfer of n_bytes bytes over elapsed_s seconds."""

    n_bytes: int
    elapsed_s: float

    @property
    def bits(self) -> int:
        return 8 * self.n_bytes

    @property
    def bps(self) -> float:
        return self.bits / self.elapsed_s

    @property
    def kbps(self) -> float:
        return self.bps / 1000.0


def compute_throughput(n_bytes: int, elapsed_s: float) -> ThroughputSample:
    """Build a sample, rejecting non-positive or non-finite elapsed time."""
    if n_bytes < 0:
        raise ValueError(f"byte count cannot be negative: {n_bytes}")
    if not math.isfinite(elapsed_s) or elapsed_s <= 0:
        raise NonPositiveElapsed(f"elapsed_s must be finite and > 0, got {elapsed_s}")
    return ThroughputSample(int(n_bytes), float(elapsed_s))


@dataclass(frozen=True)
class BenchReport:
    """A set of samples for one cipher plus where they were taken."""

    cipher: str
    environment: str
    samples: tuple

    @property
    def average_kbps(self) -> float:
        return round2(sum(s.kbps for s in self.samples) / len(self.samples))


def summarize(samples, *, cipher: str = "", environment: str = "") -> BenchReport:
    """Collect samples into a report."""
    samples = tuple(samples)
    if not samples:
        raise EmptySamples("a report needs at least one sample")
    return BenchReport(cipher=cipher, environment=environment, samples=samples)


def _default_environment() -> str:
    return (f"{platform.python_implementation()} {platform.python_version()} "
            f"on {platform.system().lower()}")


def measure_cipher(cipher, *, total_bytes: int = 4096, repetitions: int = 9,
                   key=None, rng: Random | None = None,
                   environment: str = "") -> BenchReport:
    """Time single-block encryption of ``total_bytes`` random bytes.

    ``cipher`` is a CipherDescriptor or a registered name.  Each
    repetition encrypts the same data block by block and contributes one
    sample.
    """
    if isinstance(cipher, str):
        cipher = get_cipher(cipher)
    if not isinstance(cipher, CipherDescriptor):
        raise TypeError("cipher must be a CipherDescriptor or a registered name")
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    block_bytes = cipher.block_bytes
    if total_bytes <= 0 or total_bytes % block_bytes:
        raise BadLength(
            f"total_bytes must be a positive multiple of {block_bytes}, "
            f"got {total_bytes}")
    rng = rng if rng is not None else Random()
    if key is None:
        key = cipher.sample_key(rng)
    data = rng.randbytes(total_bytes)
    blocks = [int.from_bytes(data[i:i + block_bytes], "little")
              for i in range(0, total_bytes, block_bytes)]
    encrypt_one = cipher.encrypt_one
    encrypt_one(blocks[0], key)  # warm any cached key schedule
    samples = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        for block in blocks:
            encrypt_one(block, key)
        samples.append(compute_throughput(total_bytes, time.perf_counter() - t0))
    return summarize(samples, cipher=cipher.name,
                     environment=environment or _default_environment())


def measure_pipeline(server_url: str, device_id: str, key: Key80, *,
                     chunk_bytes: int = 250, repetitions: int = 9,
                     rng: Random | None = None) -> BenchReport:
    """Time the full encrypt+post round trip against a live server."""
    if chunk_bytes <= 0:
        raise NonPositiveInput(f"chunk_bytes must be > 0, got {chunk_bytes}")
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    rng = rng if rng is not None else Random()
    samples = []
    for _ in range(repetitions):
        data = rng.randbytes(chunk_bytes)
        t0 = time.perf_counter()
        send_payload(server_url, device_id, key, data)
        samples.append(compute_throughput(chunk_bytes, time.perf_counter() - t0))
    return summarize(samples, cipher="KATAN32",
                     environment=f"pipeline to {server_url}")


def sends_per_second(target_bps: float, chunk_bytes: int) -> tuple:
    """How many chunk-sized sends per second a target bit rate implies.

    Returns (sends_per_s, interval_s).
    """
    if not target_bps > 0:
        raise NonPositiveInput(f"target_bps must be > 0, got {target_bps}")
    if not chunk_bytes > 0:
        raise NonPositiveInput(f"chunk_bytes must be > 0, got {chunk_bytes}")
    sends = target_bps / (8.0 * chunk_bytes)
    return sends, 1.0 / sends


def emit_report(report: BenchReport, fmt: str = "table") -> str:
    """Render a report as a text table or CSV (empty fmt means table)."""
    if not fmt:
        fmt = "table"
    if fmt == "csv":
        lines = [CSV_HEADER]
        for s in report.samples:
            lines.append(f"{s.n_bytes},{s.bits},{s.elapsed_s!r},"
                         f"{round2(s.bps):.2f},{round2(s.kbps):.2f}")
        lines.append(f"average,,,,{report.average_kbps:.2f}")
        return "\n".join(lines) + "\n"
    if fmt == "table":
        lines = []
        if report.cipher:
            lines.append(f"cipher       {report.cipher}")
        if report.environment:
            lines.append(f"environment  {report.environment}")
        lines.append(f"{'bytes':>10} {'bits':>10} {'elapsed_s':>12} "
                     f"{'b/s':>14} {'Kb/s':>10}")
        for s in report.samples:
            lines.append(f"{s.n_bytes:>10} {s.bits:>10} {s.elapsed_s:>12.6f} "
                         f"{round2(s.bps):>14.2f} {round2(s.kbps):>10.2f}")
        lines.append(f"average Kb/s {report.average_kbps:.2f}")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def parse_table5_csv(text: str) -> list:
    """Parse measurement rows of the form ``bytes,ms`` into samples."""
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if not lines or lines[0].replace(" ", "") != TABLE5_CSV_HEADER:
        raise ValueError(f"expected header {TABLE5_CSV_HEADER!r}")
    samples = []
    for line in lines[1:]:
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2:
            raise ValueError(f"expected 'bytes,ms' row, got {line!r}")
        samples.append(compute_throughput(int(parts[0]), float(parts[1]) / 1000.0))
    return samples


def parse_report_csv(text: str) -> list:
    """Parse emit_report csv output back into samples (average row skipped)."""
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"expected header {CSV_HEADER!r}")
    samples = []
    for line in lines[1:]:
        parts = line.split(",")
        if parts[0] == "average":
            continue
        samples.append(compute_throughput(int(parts[0]), float(parts[2])))
    return samples
