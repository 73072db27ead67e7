"""Self-describing bitstream container for quantized tensors.

File layout (all integers little-endian):

    magic "NRVB" | u16 version | u32 record count
    per record:
        u16 name length | name (UTF-8)
        u8 rank | rank * u32 dims
        f32 scale | f32 offset | f32 mu_s | f32 sigma_s
        i32 s_min | i32 s_max
        u64 payload byte length | payload

The payload is rANS-coded against a CDF table derived deterministically from
the record's own (mu_s, sigma_s, s_min, s_max), so no side information is
needed to decode. Metadata is stored uncompressed; it is a handful of scalars
per tensor.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import backend, rans
from .quant import EntropyModelParams, QuantParams, normal_cdf

MAGIC = b"NRVB"
VERSION = 1
CDF_PRECISION = 16
CONFIG_RECORD = "__config__"


class BitstreamError(ValueError):
    """Base class for decode failures."""


class CorruptHeaderError(BitstreamError):
    pass


class TruncatedPayloadError(BitstreamError):
    pass


class RangeMismatchError(BitstreamError):
    pass


@dataclass(frozen=True)
class CdfTable:
    """Integer CDF over [s_min, s_max]: strictly increasing, cum[0]=0, cum[-1]=2^precision."""

    precision: int
    s_min: int
    s_max: int
    cum: tuple[int, ...]


def build_cdf_table(m: EntropyModelParams, s_min: int, s_max: int, precision: int = CDF_PRECISION) -> CdfTable:
    """Discretize the Gaussian entropy model into integer frequencies.

    One f64 CDF-evaluation pass over the bin edges, then fixed-order integer
    arithmetic: every bin gets a floor count of 1, the rest of the 2^precision
    budget is apportioned by largest remainder (ties to the lower symbol).
    """
    if s_min > s_max:
        raise ValueError(f"empty symbol range [{s_min}, {s_max}]")
    n_bins = s_max - s_min + 1
    total = 1 << precision
    if n_bins > total:
        raise ValueError(f"{n_bins} symbols exceed 2^{precision} CDF slots")

    edges = [normal_cdf((v - 0.5 - m.mu_s) / m.sigma_s) for v in range(s_min, s_max + 2)]
    probs = [edges[i + 1] - edges[i] for i in range(n_bins)]
    mass = 0.0
    for p in probs:
        mass += p

    budget = total - n_bins
    if mass <= 0.0:
        counts = [budget // n_bins + 1] * n_bins
        for i in range(budget % n_bins):
            counts[i] += 1
    else:
        scaled = [p * budget / mass for p in probs]
        counts = [int(s) + 1 for s in scaled]
        deficit = total - sum(counts)
        order = sorted(range(n_bins), key=lambda i: (-(scaled[i] - int(scaled[i])), i))
        for i in order[:deficit]:
            counts[i] += 1

    cum = [0] * (n_bins + 1)
    for i, c in enumerate(counts):
        cum[i + 1] = cum[i] + c
    return CdfTable(precision=precision, s_min=s_min, s_max=s_max, cum=tuple(cum))


def cdf_implied_bits(table: CdfTable, symbols: np.ndarray) -> float:
    """Shannon information of ``symbols`` under the integer CDF, in bits."""
    import math

    total = float(1 << table.precision)
    bits = 0.0
    for s in np.asarray(symbols).ravel().tolist():
        i = s - table.s_min
        bits += -math.log2((table.cum[i + 1] - table.cum[i]) / total)
    return bits


def _f32(x: float) -> float:
    return float(np.float32(x))


@dataclass
class QuantizedTensorRecord:
    """One coded tensor: integer symbols plus the scalars needed to decode them."""

    name: str
    shape: tuple[int, ...]
    symbols: np.ndarray
    scale: float
    offset: float
    mu_s: float
    sigma_s: float
    s_min: int = field(default=0)
    s_max: int = field(default=0)

    def __post_init__(self):
        self.shape = tuple(int(d) for d in self.shape)
        self.symbols = np.asarray(self.symbols, dtype=np.int32).reshape(self.shape)
        # Scalars are stored as f32 on the wire; hold the exact same values.
        self.scale = _f32(self.scale)
        self.offset = _f32(self.offset)
        self.mu_s = _f32(self.mu_s)
        self.sigma_s = _f32(self.sigma_s)
        if self.symbols.size:
            lo, hi = int(self.symbols.min()), int(self.symbols.max())
            if not (self.s_min <= lo and hi <= self.s_max):
                raise ValueError(f"record {self.name!r}: symbols escape [{self.s_min}, {self.s_max}]")
        if self.s_min > self.s_max:
            raise ValueError(f"record {self.name!r}: empty symbol range")

    def entropy_model(self) -> EntropyModelParams:
        return EntropyModelParams(mu_s=self.mu_s, sigma_s=max(self.sigma_s, 1e-6))

    def cdf(self, precision: int = CDF_PRECISION) -> CdfTable:
        return build_cdf_table(self.entropy_model(), self.s_min, self.s_max, precision)

    def dequantized(self) -> np.ndarray:
        # Same f32 arithmetic as quant.dequantize, scalars straight off the wire.
        return self.symbols.astype(np.float32) * np.float32(self.scale) + np.float32(self.offset)


def record_from_array(name: str, values: np.ndarray, q: QuantParams) -> QuantizedTensorRecord:
    """Quantize a float tensor and fit its entropy model from the continuous values."""
    from .quant import fit_entropy_model, quantize

    arr = np.asarray(values, dtype=np.float32)
    symbols = quantize(arr, q)
    if symbols.size:
        m = fit_entropy_model(arr, q)
        s_min, s_max = int(symbols.min()), int(symbols.max())
    else:
        m = EntropyModelParams(mu_s=0.0, sigma_s=1.0)
        s_min = s_max = 0
    return QuantizedTensorRecord(
        name=name, shape=arr.shape, symbols=symbols,
        scale=q.scale, offset=q.offset, mu_s=m.mu_s, sigma_s=m.sigma_s,
        s_min=s_min, s_max=s_max,
    )


def records_equal(a: QuantizedTensorRecord, b: QuantizedTensorRecord) -> bool:
    return (
        a.name == b.name
        and a.shape == b.shape
        and np.array_equal(a.symbols, b.symbols)
        and a.scale == b.scale
        and a.offset == b.offset
        and a.mu_s == b.mu_s
        and a.sigma_s == b.sigma_s
        and a.s_min == b.s_min
        and a.s_max == b.s_max
    )


def encode(records: list[QuantizedTensorRecord]) -> bytes:
    """Serialize records into one self-describing stream."""
    out = bytearray()
    out += MAGIC
    out += struct.pack("<HI", VERSION, len(records))
    for rec in records:
        name_bytes = rec.name.encode("utf-8")
        if len(name_bytes) > 0xFFFF:
            raise ValueError(f"record name too long: {rec.name!r}")
        table = rec.cdf()
        payload = backend.encode_payload(rec.symbols.ravel(), table.cum, table.s_min, table.precision)
        out += struct.pack("<H", len(name_bytes))
        out += name_bytes
        out += struct.pack("<B", len(rec.shape))
        out += struct.pack(f"<{len(rec.shape)}I", *rec.shape)
        out += struct.pack("<ffff", rec.scale, rec.offset, rec.mu_s, rec.sigma_s)
        out += struct.pack("<iiQ", rec.s_min, rec.s_max, len(payload))
        out += payload
    return bytes(out)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise CorruptHeaderError(f"stream ends inside {what}")
        chunk = self.buf[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def decode(stream: bytes) -> list[QuantizedTensorRecord]:
    """Parse and entropy-decode every record; exact inverse of :func:`encode`."""
    r = _Reader(stream)
    if r.take(4, "magic") != MAGIC:
        raise CorruptHeaderError("bad magic: not an NRVB stream")
    version, count = r.unpack("<HI", "header")
    if version != VERSION:
        raise CorruptHeaderError(f"unsupported stream version {version}")
    records = []
    for _ in range(count):
        (name_len,) = r.unpack("<H", "record name length")
        name = r.take(name_len, "record name").decode("utf-8")
        (rank,) = r.unpack("<B", "rank")
        shape = r.unpack(f"<{rank}I", "dims") if rank else ()
        scale, offset, mu_s, sigma_s = r.unpack("<ffff", "quantizer scalars")
        s_min, s_max, payload_len = r.unpack("<iiQ", "symbol range")
        start = r.pos
        if start + payload_len > len(stream):
            raise TruncatedPayloadError(f"record {name!r}: payload extends past end of stream")
        payload = stream[start : start + payload_len]
        r.pos = start + payload_len
        count_elems = 1
        for d in shape:
            count_elems *= d
        if s_min > s_max:
            raise RangeMismatchError(f"record {name!r}: empty symbol range")
        model = EntropyModelParams(mu_s=float(mu_s), sigma_s=max(float(sigma_s), 1e-6))
        table = build_cdf_table(model, s_min, s_max)
        try:
            symbols = backend.decode_payload(payload, count_elems, table.cum, table.s_min, table.precision)
        except rans.TruncatedError as e:
            raise TruncatedPayloadError(f"record {name!r}: {e}") from e
        except rans.CoderError as e:
            raise RangeMismatchError(f"record {name!r}: {e}") from e
        records.append(
            QuantizedTensorRecord(
                name=name, shape=shape, symbols=symbols.reshape(shape),
                scale=float(scale), offset=float(offset),
                mu_s=float(mu_s), sigma_s=float(sigma_s),
                s_min=s_min, s_max=s_max,
            )
        )
    return records


def config_record(config_text: str) -> QuantizedTensorRecord:
    """Carry structured-text config inside the stream as a byte-valued record."""
    data = config_text.encode("utf-8")
    symbols = np.frombuffer(data, dtype=np.uint8).astype(np.int32)
    mu = float(symbols.mean()) if symbols.size else 0.0
    sigma = max(float(symbols.std()), 1e-6) if symbols.size else 1.0
    return QuantizedTensorRecord(
        name=CONFIG_RECORD, shape=(len(data),), symbols=symbols,
        scale=1.0, offset=0.0, mu_s=mu, sigma_s=sigma, s_min=0, s_max=255,
    )


def read_config_record(rec: QuantizedTensorRecord) -> str:
    return bytes(rec.symbols.astype(np.uint8)).decode("utf-8")


def serialize_model_payload(
    named_arrays: dict[str, np.ndarray],
    quantizers: dict[str, QuantParams],
    config_text: str,
) -> bytes:
    """Quantize and pack named tensors plus their config into one stream."""
    records = [config_record(config_text)]
    for name, arr in named_arrays.items():
        records.append(record_from_array(name, arr, quantizers[name]))
    return encode(records)


def deserialize_model_payload(stream: bytes) -> tuple[str, dict[str, np.ndarray], list[QuantizedTensorRecord]]:
    """Inverse of :func:`serialize_model_payload`; arrays come back dequantized (f32)."""
    records = decode(stream)
    if not records or records[0].name != CONFIG_RECORD:
        raise CorruptHeaderError("stream carries no config record")
    config_text = read_config_record(records[0])
    arrays = {rec.name: rec.dequantized() for rec in records[1:]}
    return config_text, arrays, records[1:]
