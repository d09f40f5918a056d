"""Compare the numba and numpy edit-distance kernels on a linking-shaped
workload: every question span scanned against every cell value.

    python benchmarks/bench_matching.py [--pairs 200000]
"""

from __future__ import annotations

import argparse
import random
import time

from stepsql.matching import (
    _build_numba_kernel,
    _codepoints,
    _levenshtein_numpy,
    edit_distance,
)

WORDS = [
    "Watkins", "Montgomery", "Fitzgerald", "Rousseau", "Okafor",
    "January", "February", "August", "October", "household",
    "industrial", "commercial", "Hangzhou", "Ningbo", "Jinhua",
    "amount", "customer", "bill_month", "tariff", "region",
]


def make_workload(n_pairs: int, seed: int = 0) -> list[tuple[str, str]]:
    rng = random.Random(seed)
    pairs = []
    for _ in range(n_pairs):
        a = rng.choice(WORDS)
        b = rng.choice(WORDS)
        if rng.random() < 0.5:  # typo-shaped mutation keeps distances small
            i = rng.randrange(len(a))
            a = a[:i] + rng.choice("abcdefghij") + a[i + 1 :]
        pairs.append((a, b))
    return pairs


def bench(kernel, pairs, limit: int) -> tuple[float, int]:
    total = 0
    start = time.perf_counter()
    for a, b in pairs:
        total += int(kernel(_codepoints(a), _codepoints(b), limit))
    return time.perf_counter() - start, total


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--pairs", type=int, default=200_000)
    parser.add_argument("--limit", type=int, default=2)
    args = parser.parse_args()

    pairs = make_workload(args.pairs)
    try:
        numba_kernel = _build_numba_kernel()
        numba_kernel(_codepoints("warm"), _codepoints("up"), 2)  # compile outside timing
    except ImportError:
        numba_kernel = None

    rows = []
    if numba_kernel is not None:
        secs, checksum = bench(numba_kernel, pairs, args.limit)
        rows.append(("numba", secs, checksum))
    secs, checksum = bench(_levenshtein_numpy, pairs, args.limit)
    rows.append(("numpy", secs, checksum))

    checksums = {c for _, _, c in rows}
    assert len(checksums) == 1, f"kernels disagree: {checksums}"

    print(f"workload: {args.pairs} bounded distance calls (limit {args.limit})")
    print(f"{'kernel':<8}{'seconds':>10}{'ns/call':>12}")
    for name, secs, _ in rows:
        print(f"{name:<8}{secs:>10.3f}{secs / args.pairs * 1e9:>12.0f}")
    if numba_kernel is not None and len(rows) == 2:
        print(f"speedup: {rows[1][1] / rows[0][1]:.1f}x")
    # sanity: the public API agrees with the raw kernels
    a, b = pairs[0]
    assert edit_distance(a, b, limit=args.limit) == int(
        _levenshtein_numpy(_codepoints(a), _codepoints(b), args.limit)
    )


if __name__ == "__main__":
    main()
