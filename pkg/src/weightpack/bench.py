"""Codec micro-benchmark: throughput of the pack and unpack paths.

Before any timing runs, every fast path is checked byte-for-byte against
the scalar reference on a fresh random input; a mismatch aborts the bench.
Timings report the best of N repeats against the raw input size.
"""

from __future__ import annotations

import time
from typing import IO

import numpy as np

from . import codec

BENCH_HEADER = ("path", "size", "round_to", "workers", "seconds", "bytes_per_s")

#: Input size above which a slower vectorized path earns a warning.
LARGE_INPUT_WEIGHTS = 1 << 20  # 4 MiB of float32


def random_weights(size: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform random 32-bit patterns viewed as floats (NaN/Inf included)."""
    words = rng.integers(0, 1 << 32, size=size, dtype=np.uint32)
    return words.view(np.float32)


def equivalence_precheck(size: int, round_tos, workers, rng: np.random.Generator) -> None:
    """Assert fast paths match scalar pack byte-for-byte; raises on mismatch."""
    weights = random_weights(size, rng)
    for r in round_tos:
        reference = codec.pack(weights, r)
        if codec.pack_vectorized(weights, r) != reference:
            raise AssertionError(f"pack_vectorized mismatch at round_to={r}")
        for count in workers:
            if codec.pack_parallel(weights, r, count) != reference:
                raise AssertionError(f"pack_parallel mismatch at round_to={r}, workers={count}")
        restored = codec.unpack(reference)
        expected = weights.view(np.uint32) & np.uint32(codec.truncation_mask(r))
        if not np.array_equal(restored.view(np.uint32), expected):
            raise AssertionError(f"unpack mismatch at round_to={r}")


def _best_seconds(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def run_bench(sizes, round_tos, workers, repeats: int, rng: np.random.Generator) -> list[tuple]:
    """Time each path over each (size, round_to); returns BENCH_HEADER rows."""
    rows = []
    for size in sizes:
        weights = random_weights(size, rng)
        raw_bytes = weights.nbytes
        for r in round_tos:
            secs = _best_seconds(lambda: codec.pack(weights, r), repeats)
            rows.append(("scalar", size, r, 1, secs, raw_bytes / secs))
            secs = _best_seconds(lambda: codec.pack_vectorized(weights, r), repeats)
            rows.append(("vectorized", size, r, 1, secs, raw_bytes / secs))
            for count in workers:
                secs = _best_seconds(lambda: codec.pack_parallel(weights, r, count), repeats)
                rows.append(("parallel", size, r, count, secs, raw_bytes / secs))
            block = codec.pack_vectorized(weights, r)
            secs = _best_seconds(lambda: codec.unpack(block), repeats)
            rows.append(("unpack", size, r, 1, secs, raw_bytes / secs))
    return rows


def slow_vector_warnings(rows) -> list[str]:
    """Soft warnings where the vectorized path lost to scalar on large inputs."""
    scalar = {(size, r): secs for path, size, r, _, secs, _ in rows if path == "scalar"}
    warnings = []
    for path, size, r, _, secs, _ in rows:
        if path != "vectorized" or size < LARGE_INPUT_WEIGHTS:
            continue
        ref = scalar.get((size, r))
        if ref is not None and secs > ref:
            warnings.append(
                f"warning: vectorized pack slower than scalar at size={size} round_to={r} "
                f"({secs:.4f}s vs {ref:.4f}s)"
            )
    return warnings


def render_bench_table(rows) -> str:
    table = [BENCH_HEADER] + [
        (path, str(size), str(r), str(w), f"{secs:.6f}", f"{bps / 1e9:.3f} GB/s")
        for path, size, r, w, secs, bps in rows
    ]
    widths = [max(len(row[i]) for row in table) for i in range(len(BENCH_HEADER))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in table]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def write_bench_csv(stream: IO[str], rows) -> None:
    stream.write(",".join(BENCH_HEADER) + "\n")
    for path, size, r, w, secs, bps in rows:
        stream.write(f"{path},{size},{r},{w},{secs!r},{bps!r}\n")
