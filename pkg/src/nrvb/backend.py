"""Entropy-coder backend selection.

The pure-Python coder in :mod:`nrvb.rans` is the reference; an optional
compiled kernel (a C-ABI shared library, see ``kernel/`` in the source tree)
provides a bit-exact accelerated drop-in. The kernel is picked up at import
when found via ``NRVB_KERNEL`` or the default build location; everything falls
back to the reference coder otherwise.
"""

from __future__ import annotations

import ctypes
import os
from pathlib import Path

import numpy as np

from . import rans

_KERNEL_LIB_NAMES = ("libfast_coder_kernel.so", "fast_coder_kernel.dll", "libfast_coder_kernel.dylib")

_STATUS_ERRORS = {
    1: lambda msg: rans.CoderError(f"kernel: invalid CDF table ({msg})"),
    2: lambda msg: rans.CoderError(f"kernel: symbol outside CDF range ({msg})"),
    3: lambda msg: rans.TruncatedError(f"kernel: truncated payload ({msg})"),
    4: lambda msg: rans.StateMismatchError(f"kernel: decoder state mismatch ({msg})"),
    5: lambda msg: rans.CoderError(f"kernel: output buffer too small ({msg})"),
}


class _Kernel:
    def __init__(self, lib: ctypes.CDLL, path: str):
        self.path = path
        self._encode = lib.fck_encode
        self._encode.restype = ctypes.c_int32
        self._encode.argtypes = [
            ctypes.POINTER(ctypes.c_int32), ctypes.c_size_t,
            ctypes.POINTER(ctypes.c_uint32), ctypes.c_size_t,
            ctypes.c_uint32, ctypes.c_int32,
            ctypes.POINTER(ctypes.c_uint8), ctypes.c_size_t,
            ctypes.POINTER(ctypes.c_size_t),
        ]
        self._decode = lib.fck_decode
        self._decode.restype = ctypes.c_int32
        self._decode.argtypes = [
            ctypes.POINTER(ctypes.c_uint8), ctypes.c_size_t,
            ctypes.c_size_t,
            ctypes.POINTER(ctypes.c_uint32), ctypes.c_size_t,
            ctypes.c_uint32, ctypes.c_int32,
            ctypes.POINTER(ctypes.c_int32),
        ]

    def encode(self, symbols, cum, s_min: int, precision: int) -> bytes:
        syms = np.ascontiguousarray(symbols, dtype=np.int32).ravel()
        cum_arr = np.ascontiguousarray(cum, dtype=np.uint32)
        # Renormalization emits at most one u32 per symbol, plus the 8-byte flush.
        cap = 4 * syms.size + 8
        out = np.empty(cap, dtype=np.uint8)
        written = ctypes.c_size_t(0)
        status = self._encode(
            syms.ctypes.data_as(ctypes.POINTER(ctypes.c_int32)), syms.size,
            cum_arr.ctypes.data_as(ctypes.POINTER(ctypes.c_uint32)), cum_arr.size,
            precision, s_min,
            out.ctypes.data_as(ctypes.POINTER(ctypes.c_uint8)), cap,
            ctypes.byref(written),
        )
        if status != 0:
            raise _STATUS_ERRORS.get(status, rans.CoderError)("encode")
        return out[: written.value].tobytes()

    def decode(self, payload: bytes, count: int, cum, s_min: int, precision: int) -> np.ndarray:
        buf = np.frombuffer(payload, dtype=np.uint8)
        buf = np.ascontiguousarray(buf)
        cum_arr = np.ascontiguousarray(cum, dtype=np.uint32)
        out = np.empty(count, dtype=np.int32)
        status = self._decode(
            buf.ctypes.data_as(ctypes.POINTER(ctypes.c_uint8)), buf.size,
            count,
            cum_arr.ctypes.data_as(ctypes.POINTER(ctypes.c_uint32)), cum_arr.size,
            precision, s_min,
            out.ctypes.data_as(ctypes.POINTER(ctypes.c_int32)),
        )
        if status != 0:
            raise _STATUS_ERRORS.get(status, rans.CoderError)("decode")
        return out


_kernel: _Kernel | None = None


def _candidate_paths() -> list[Path]:
    paths = []
    env = os.environ.get("NRVB_KERNEL")
    if env:
        paths.append(Path(env))
    repo_root = Path(__file__).resolve().parents[2]
    for name in _KERNEL_LIB_NAMES:
        paths.append(repo_root / "kernel" / "target" / "release" / name)
        paths.append(repo_root.parent / "kernel" / "target" / "release" / name)
    return paths


def load_kernel(path: str | os.PathLike | None = None) -> bool:
    """Try to activate the compiled coder; returns True on success."""
    global _kernel
    candidates = [Path(path)] if path else _candidate_paths()
    for cand in candidates:
        if not cand.is_file():
            continue
        try:
            lib = ctypes.CDLL(str(cand))
            _kernel = _Kernel(lib, str(cand))
            return True
        except OSError:
            continue
    return False


def use_reference():
    """Force the pure-Python coder (mainly for tests and benchmarks)."""
    global _kernel
    _kernel = None


def active_backend() -> str:
    return "kernel" if _kernel is not None else "reference"


def kernel_path() -> str | None:
    return _kernel.path if _kernel is not None else None


def encode_payload(symbols, cum, s_min: int, precision: int) -> bytes:
    if _kernel is not None:
        return _kernel.encode(symbols, cum, s_min, precision)
    return rans.encode(symbols, cum, s_min, precision)


def decode_payload(payload: bytes, count: int, cum, s_min: int, precision: int) -> np.ndarray:
    if _kernel is not None:
        return _kernel.decode(payload, count, cum, s_min, precision)
    return rans.decode(payload, count, cum, s_min, precision)


if os.environ.get("NRVB_NO_KERNEL") != "1":
    load_kernel()
