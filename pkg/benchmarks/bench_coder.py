#!/usr/bin/env python3
"""Benchmark the pure-Python reference coder against the compiled kernel.

Usage: python3 benchmarks/bench_coder.py [n_symbols]
"""

import sys
import time

import numpy as np

from nrvb import backend, rans
from nrvb.bitstream import build_cdf_table
from nrvb.quant import EntropyModelParams


def time_once(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def main() -> int:
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 1_000_000
    rng = np.random.default_rng(0)
    sigma = 20.0
    table = build_cdf_table(EntropyModelParams(0.0, sigma), -200, 200)
    symbols = np.clip(np.round(rng.normal(0, sigma, size=n)), -200, 200).astype(np.int32)

    backend.use_reference()
    ref_payload, ref_enc = time_once(lambda: rans.encode(symbols, table.cum, table.s_min, 16))
    _, ref_dec = time_once(lambda: rans.decode(ref_payload, n, table.cum, table.s_min, 16))
    print(f"reference ({n:,} symbols, {len(ref_payload):,} bytes):")
    print(f"  encode {ref_enc:8.3f}s  ({n / ref_enc / 1e6:6.2f} Msym/s)")
    print(f"  decode {ref_dec:8.3f}s  ({n / ref_dec / 1e6:6.2f} Msym/s)")

    if not backend.load_kernel():
        print("kernel not built (cargo build --release in kernel/); skipping comparison")
        return 0
    ker_payload, ker_enc = time_once(
        lambda: backend.encode_payload(symbols, table.cum, table.s_min, 16)
    )
    _, ker_dec = time_once(
        lambda: backend.decode_payload(ker_payload, n, table.cum, table.s_min, 16)
    )
    lib = backend.kernel_path()
    backend.use_reference()
    match = "byte-identical" if ker_payload == ref_payload else "PAYLOAD MISMATCH"
    print(f"kernel [{lib}] ({match}):")
    print(f"  encode {ker_enc:8.3f}s  ({n / ker_enc / 1e6:6.2f} Msym/s)  {ref_enc / ker_enc:6.1f}x")
    print(f"  decode {ker_dec:8.3f}s  ({n / ker_dec / 1e6:6.2f} Msym/s)  {ref_dec / ker_dec:6.1f}x")
    return 0 if match == "byte-identical" else 1


if __name__ == "__main__":
    sys.exit(main())
