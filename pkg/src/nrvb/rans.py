"""Reference rANS coder.

This implementation is normative: any accelerated backend must reproduce its
payloads byte for byte. The state machine is the 64-bit/32-bit-renormalization
variant:

- state lives in [RANS_L, RANS_L << 32) = [2^31, 2^63)
- frequencies come from an integer CDF summing to 2^precision (default 16)
- encoding walks the symbols in reverse; renormalization emits the low 32
  bits of the state as one little-endian u32 word
- the final state is flushed as two u32 words (low, then high)
- the payload is the emitted word list reversed, so a decoder reads the high
  and low state words first and then consumes renormalization words forward

An empty symbol sequence therefore costs exactly 8 bytes. Decoding checks
that the state returns to RANS_L, which catches mismatched CDF tables and
corrupt payloads.
"""

from __future__ import annotations

from bisect import bisect_right
from collections.abc import Sequence

import numpy as np

RANS_L = 1 << 31
_MASK32 = (1 << 32) - 1


class CoderError(ValueError):
    """Raised on invalid coder input or a corrupt payload."""


class TruncatedError(CoderError):
    """Payload ended before all symbols were recovered."""


class StateMismatchError(CoderError):
    """Decoder did not return to the initial state: wrong CDF or corruption."""


def encode(symbols: Sequence[int] | np.ndarray, cum: Sequence[int], s_min: int, precision: int) -> bytes:
    """Entropy-code ``symbols`` against the CDF ``cum`` (length K+1, cum[-1] == 2^precision)."""
    n_sym = len(cum) - 1
    total = 1 << precision
    if cum[0] != 0 or cum[-1] != total:
        raise CoderError(f"CDF must span [0, 2^{precision}], got [{cum[0]}, {cum[-1]}]")
    syms = np.asarray(symbols, dtype=np.int64).ravel()
    if syms.size and (syms.min() < s_min or syms.max() >= s_min + n_sym):
        raise CoderError("symbol outside CDF range")

    renorm_shifted = (RANS_L >> precision) << 32
    state = RANS_L
    words = []
    for s in syms[::-1].tolist():
        i = s - s_min
        start = cum[i]
        freq = cum[i + 1] - start
        if state >= renorm_shifted * freq:
            words.append(state & _MASK32)
            state >>= 32
        state = ((state // freq) << precision) + (state % freq) + start
    words.append(state & _MASK32)
    words.append((state >> 32) & _MASK32)
    return b"".join(w.to_bytes(4, "little") for w in reversed(words))


def decode(payload: bytes, count: int, cum: Sequence[int], s_min: int, precision: int) -> np.ndarray:
    """Recover ``count`` symbols from a payload produced by :func:`encode`."""
    if len(payload) < 8:
        raise TruncatedError("payload truncated: missing state flush")
    cum_list = list(cum)
    mask = (1 << precision) - 1
    hi = int.from_bytes(payload[0:4], "little")
    lo = int.from_bytes(payload[4:8], "little")
    state = (hi << 32) | lo
    pos = 8
    out = np.empty(count, dtype=np.int32)
    for k in range(count):
        cf = state & mask
        i = bisect_right(cum_list, cf) - 1
        start = cum_list[i]
        freq = cum_list[i + 1] - start
        state = freq * (state >> precision) + cf - start
        if state < RANS_L:
            if pos + 4 > len(payload):
                raise TruncatedError("payload truncated mid-stream")
            state = (state << 32) | int.from_bytes(payload[pos : pos + 4], "little")
            pos += 4
        out[k] = i + s_min
    if state != RANS_L:
        raise StateMismatchError("decoder state mismatch: wrong CDF or corrupt payload")
    return out
