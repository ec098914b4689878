#!/usr/bin/env python3
"""Benchmark the sample-resolution kernel: compiled extension vs pure Python.

Builds a realistic workload (24 tile tracks, extractor samples with one
inline + one copy constructor per tile) and times resolve_sample_payload
on both backends over the same inputs.

Usage: python benchmarks/bench_resolve.py [--samples 2000] [--tiles 24]
"""
import argparse
import random
import time

from omafvd import _speedups_py
from omafvd.generator import extractor_sample_payload, tile_sample_payload

try:
    from omafvd import _speedups
    BACKENDS = {"python": _speedups_py, "c": _speedups}
except ImportError:
    BACKENDS = {"python": _speedups_py}


def build_workload(samples: int, tiles: int, seed: int = 1):
    rng = random.Random(seed)
    work = []
    total_bytes = 0
    for i in range(samples):
        seq = i // 30 + 1
        idx = i % 30
        refs = [tile_sample_payload(seed, tid, seq, idx) for tid in range(1, tiles + 1)]
        sample = extractor_sample_payload(seed, 101 + rng.randrange(24), seq, idx, tiles)
        work.append((sample, refs))
        total_bytes += len(sample) + sum(len(r) for r in refs)
    return work, total_bytes


def time_backend(impl, work, repeats: int = 5) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for sample, refs in work:
            impl.resolve_sample_payload(sample, refs, 4)
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--samples", type=int, default=2000)
    parser.add_argument("--tiles", type=int, default=24)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    work, total_bytes = build_workload(args.samples, args.tiles)
    out_bytes = sum(len(_speedups_py.resolve_sample_payload(s, r, 4)) for s, r in work)
    print(f"workload: {args.samples} samples x {args.tiles} tiles, "
          f"{total_bytes / 1e6:.1f} MB in, {out_bytes / 1e6:.1f} MB resolved")

    results = {}
    for name, impl in BACKENDS.items():
        elapsed = time_backend(impl, work, args.repeats)
        results[name] = elapsed
        rate = out_bytes / elapsed / 1e6
        per_sample = elapsed / args.samples * 1e6
        print(f"{name:>7}: {elapsed * 1e3:8.1f} ms  ({rate:7.1f} MB/s resolved, "
              f"{per_sample:6.1f} us/sample)")
    if "c" in results:
        print(f"speedup: {results['python'] / results['c']:.2f}x")
    else:
        print("speedup: compiled backend not built (pure Python only)")


if __name__ == "__main__":
    main()
