#!/usr/bin/env python3
"""Measure cosine-search throughput over a synthetic full-scale pool.

Reports single-query latency (single-threaded BLAS) and the per-query
speedup from batching, mirroring the acceptance suite's throughput check
but with configurable sizes for profiling on other hosts.
"""

import argparse
import time

import numpy as np

from sonify.embeddings import EmbeddingMatrix, batch_cosine_sim, cosine_sim


def timed(fn) -> float:
    start = time.perf_counter()
    fn()
    return time.perf_counter() - start


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=500_000)
    parser.add_argument("--dim", type=int, default=512)
    parser.add_argument("--batch", type=int, default=8)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    print(f"building {args.rows} x {args.dim} float32 pool "
          f"({args.rows * args.dim * 4 / 1e9:.2f} GB)...")
    rows = rng.standard_normal((args.rows, args.dim), dtype=np.float32)
    rows /= np.linalg.norm(rows, axis=1, keepdims=True)
    pool = EmbeddingMatrix(rows, [str(i) for i in range(args.rows)], normalized=True)

    query = rng.standard_normal(args.dim)
    queries = rng.standard_normal((args.batch, args.dim))

    cosine_sim(query, pool)  # warm up
    try:
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=1):
            single = min(timed(lambda: cosine_sim(query, pool)) for _ in range(args.repeats))
        label = "single-threaded"
    except ImportError:
        single = min(timed(lambda: cosine_sim(query, pool)) for _ in range(args.repeats))
        label = "default BLAS threading"
    print(f"single query: {single * 1000:.1f} ms ({label})")

    batch_cosine_sim(queries, pool)  # warm up
    batched = min(timed(lambda: batch_cosine_sim(queries, pool)) for _ in range(args.repeats))
    sequential = min(
        timed(lambda: [cosine_sim(queries[i], pool) for i in range(args.batch)])
        for _ in range(args.repeats)
    )
    print(
        f"{args.batch}-way batch: {batched * 1000:.1f} ms total, "
        f"{batched / args.batch * 1000:.2f} ms/query; "
        f"sequential {sequential * 1000:.1f} ms; "
        f"scaling {sequential / batched:.2f}x"
    )


if __name__ == "__main__":
    main()
