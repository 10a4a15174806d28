"""Turn packet captures (or synthetic profiles) into packets-per-second series.

Supports classic pcap only. pcapng files are rejected with a pointer to
conversion tooling (`tshark -F pcap`).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyCapture,
    InvalidProfile,
    MalformedRow,
    NonUniformSpacing,
    UnknownMagic,
)

# magic read as little-endian u32 -> (struct byte order, timestamp fraction unit)
_PCAP_MAGICS = {
    0xA1B2C3D4: ("<", 1e-6),
    0xD4C3B2A1: (">", 1e-6),
    0xA1B23C4D: ("<", 1e-9),
    0x4D3CB2A1: (">", 1e-9),
}
_PCAPNG_MAGIC = 0x0A0D0D0A

PRNG_NAME = f"numpy.random.PCG64 (numpy {np.__version__})"


@dataclass(frozen=True)
class PacketRecord:
    ts_seconds: float
    captured_len: int


@dataclass
class PcapParse:
    records: list[PacketRecord]
    truncated: bool = False


@dataclass
class TrafficSeries:
    start_ts: float
    bucket_seconds: float
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.bucket_seconds <= 0:
            raise ValueError("bucket_seconds must be > 0")

    def __len__(self):
        return len(self.values)

    def timestamps(self) -> np.ndarray:
        return self.start_ts + np.arange(len(self.values)) * self.bucket_seconds

    def slice(self, start: int, stop: int, label: str | None = None) -> "TrafficSeries":
        return TrafficSeries(
            start_ts=self.start_ts + start * self.bucket_seconds,
            bucket_seconds=self.bucket_seconds,
            values=self.values[start:stop].copy(),
            label=self.label if label is None else label,
        )


@dataclass(frozen=True)
class SyntheticProfile:
    kind: str  # video | iperf | constant | sine
    base_rate: float = 100.0
    burst_rate: float = 400.0
    p_enter_burst: float = 0.05
    p_exit_burst: float = 0.2
    noise_std: float = 0.0
    seed: int = 0


def parse_pcap(data: bytes) -> PcapParse:
    """Parse a classic pcap byte stream into packet records.

    A capture cut mid-record (common with killed tcpdump) yields the records
    read so far with ``truncated=True`` instead of an error.
    """
    if len(data) < 4:
        raise UnknownMagic("input shorter than a pcap magic number")
    magic = int.from_bytes(data[:4], "little")
    if magic == _PCAPNG_MAGIC or int.from_bytes(data[:4], "big") == _PCAPNG_MAGIC:
        raise UnknownMagic(
            "pcapng is not supported; convert with `tshark -F pcap -w out.pcap -r in.pcapng`"
        )
    if magic not in _PCAP_MAGICS:
        raise UnknownMagic(f"unrecognized pcap magic 0x{magic:08x}")
    order, frac_unit = _PCAP_MAGICS[magic]

    records: list[PacketRecord] = []
    if len(data) < 24:
        return PcapParse(records, truncated=True)

    rec_hdr = struct.Struct(order + "IIII")
    off = 24
    truncated = False
    while off < len(data):
        if off + 16 > len(data):
            truncated = True
            break
        ts_sec, ts_frac, incl_len, _orig_len = rec_hdr.unpack_from(data, off)
        off += 16
        if off + incl_len > len(data):
            truncated = True
            break
        off += incl_len
        records.append(PacketRecord(ts_sec + ts_frac * frac_unit, incl_len))
    return PcapParse(records, truncated)


def bucketize(
    records: list[PacketRecord], bucket_seconds: float = 1.0, label: str = ""
) -> TrafficSeries:
    """Count packets into uniform buckets anchored at floor(min_ts / b) * b."""
    if not records:
        raise EmptyCapture("no packet records to bucketize")
    if bucket_seconds <= 0:
        raise ValueError("bucket_seconds must be > 0")
    ts = np.array([r.ts_seconds for r in records], dtype=np.float64)
    origin = math.floor(ts.min() / bucket_seconds)
    idx = np.floor(ts / bucket_seconds).astype(np.int64) - origin
    values = np.bincount(idx, minlength=int(idx.max()) + 1).astype(np.float64)
    return TrafficSeries(
        start_ts=origin * bucket_seconds,
        bucket_seconds=bucket_seconds,
        values=values,
        label=label,
    )


def _box_muller(rng: np.random.Generator) -> float:
    # explicit Box-Muller so the noise stream is pinned to the documented PRNG
    u1 = rng.random()
    u2 = rng.random()
    return math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)


def generate(
    profile: SyntheticProfile, n_steps: int, bucket_seconds: float = 1.0
) -> TrafficSeries:
    """Deterministic synthetic traffic: two-state base/burst Markov chain plus
    Gaussian noise, clamped at zero."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if not (0.0 <= profile.p_enter_burst <= 1.0 and 0.0 <= profile.p_exit_burst <= 1.0):
        raise InvalidProfile("burst transition probabilities must lie in [0, 1]")
    if profile.base_rate < 0 or profile.burst_rate < 0 or profile.noise_std < 0:
        raise InvalidProfile("rates and noise_std must be non-negative")
    if profile.kind not in ("video", "iperf", "constant", "sine"):
        raise InvalidProfile(f"unknown profile kind {profile.kind!r}")

    rng = np.random.Generator(np.random.PCG64(profile.seed))
    values = np.empty(n_steps, dtype=np.float64)
    in_burst = False
    for t in range(n_steps):
        if profile.kind in ("video", "iperf"):
            u = rng.random()
            if in_burst:
                if u < profile.p_exit_burst:
                    in_burst = False
            elif u < profile.p_enter_burst:
                in_burst = True
            rate = profile.burst_rate if in_burst else profile.base_rate
        elif profile.kind == "sine":
            rate = profile.base_rate * (1.0 + 0.5 * math.sin(2.0 * math.pi * t / 50.0))
        else:
            rate = profile.base_rate
        noise = _box_muller(rng) * profile.noise_std
        values[t] = max(0.0, rate + noise)
    return TrafficSeries(0.0, bucket_seconds, values, label=profile.kind)


def default_profile(kind: str, seed: int = 0) -> SyntheticProfile:
    if kind == "video":
        return SyntheticProfile(
            "video", base_rate=120, burst_rate=480, p_enter_burst=0.08,
            p_exit_burst=0.25, noise_std=12, seed=seed,
        )
    if kind == "iperf":
        return SyntheticProfile(
            "iperf", base_rate=300, burst_rate=320, p_enter_burst=0.02,
            p_exit_burst=0.5, noise_std=4, seed=seed,
        )
    if kind == "constant":
        return SyntheticProfile("constant", base_rate=100, seed=seed)
    if kind == "sine":
        return SyntheticProfile("sine", base_rate=200, noise_std=2, seed=seed)
    raise InvalidProfile(f"unknown profile kind {kind!r}")


def write_csv(series: TrafficSeries) -> bytes:
    lines = [f"# prng: {PRNG_NAME}"]
    if series.label:
        lines.append(f"# label: {series.label}")
    lines.append("timestamp,pps")
    for i, v in enumerate(series.values):
        t = series.start_ts + i * series.bucket_seconds
        lines.append(f"{float(t)!r},{float(v)!r}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def read_csv(data: bytes) -> TrafficSeries:
    label = ""
    rows: list[tuple[float, float]] = []
    saw_header = False
    for lineno, line in enumerate(data.decode("utf-8").splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line[1:].strip().startswith("label:"):
                label = line.split("label:", 1)[1].strip()
            continue
        if not saw_header:
            if line.replace(" ", "") != "timestamp,pps":
                raise MalformedRow(f"line {lineno}: expected header 'timestamp,pps'")
            saw_header = True
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise MalformedRow(f"line {lineno}: expected two columns")
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise MalformedRow(f"line {lineno}: {exc}") from exc
    if not rows:
        raise MalformedRow("no data rows")

    ts = np.array([r[0] for r in rows])
    if len(rows) > 1:
        gaps = np.diff(ts)
        bucket = gaps[0]
        if bucket <= 0 or np.any(np.abs(gaps - bucket) > 1e-6):
            raise NonUniformSpacing("timestamps must ascend with uniform spacing")
    else:
        bucket = 1.0
    return TrafficSeries(
        start_ts=ts[0],
        bucket_seconds=float(bucket),
        values=np.array([r[1] for r in rows]),
        label=label,
    )
