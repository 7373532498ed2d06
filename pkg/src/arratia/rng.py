"""Counter-based random streams and deterministic replication fan-out.

Every random stream is a Philox4x64 generator whose key is
``(seed, blake2b_64(tag))`` and whose 256-bit counter starts at
``(0, 0, index, 0)``.  Philox only increments the low counter words while
drawing, so streams for different indices never overlap in practice
(2**128 blocks per stream).  A replication's numbers therefore depend only on
``(seed, tag, index)`` and never on how replications are split across
workers.
"""
from __future__ import annotations

import hashlib
from typing import Any, Callable, Sequence

import numpy as np

UINT64_MAX = 2**64 - 1


def tag_key(tag: str) -> int:
    return int.from_bytes(hashlib.blake2b(tag.encode(), digest_size=8).digest(), "little")


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= UINT64_MAX:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def stream(seed: int, tag: str, index: int = 0) -> np.random.Generator:
    """Independent generator for replication ``index`` of experiment ``tag``."""
    key = np.array([check_seed(seed), tag_key(tag)], dtype=np.uint64)
    counter = np.array([0, 0, int(index), 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def _run_chunk(fn, seed, tag, start, stop):
    return [fn(stream(seed, tag, i), i) for i in range(start, stop)]


def _chunks(n: int, workers: int) -> list[tuple[int, int]]:
    n_chunks = max(1, min(n, 4 * workers))
    edges = np.linspace(0, n, n_chunks + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def replicate(
    fn: Callable[[np.random.Generator, int], Any],
    replications: int,
    seed: int,
    tag: str,
    workers: int = 1,
) -> list:
    """Run ``fn(rng_i, i)`` for ``i in range(replications)``, results in index order.

    ``fn`` must be picklable when ``workers > 1``.  The output is identical for
    every worker count.
    """
    if replications < 0:
        raise ValueError("replications must be non-negative")
    if workers <= 1 or replications < 2:
        return _run_chunk(fn, seed, tag, 0, replications)

    from joblib import Parallel, delayed

    parts = Parallel(n_jobs=workers)(
        delayed(_run_chunk)(fn, seed, tag, a, b) for a, b in _chunks(replications, workers)
    )
    return [r for part in parts for r in part]


def chunked_draws(
    draw: Callable[[np.random.Generator, int], np.ndarray],
    n: int,
    seed: int,
    tag: str,
    chunk: int = 8192,
) -> np.ndarray:
    """Vectorised draws in fixed-size chunks, one stream per chunk.

    The chunk size is fixed independently of any worker count, so the result is
    a pure function of ``(seed, tag, n, chunk)``.
    """
    sizes: Sequence[int] = [min(chunk, n - s) for s in range(0, n, chunk)]
    parts = [draw(stream(seed, tag, i), size) for i, size in enumerate(sizes)]
    return np.concatenate(parts) if parts else np.empty(0)


def run_blocks(
    block_fn: Callable[[int, int], Any],
    replications: int,
    workers: int = 1,
    block_size: int = 256,
) -> list:
    """Evaluate ``block_fn(start, stop)`` over fixed-size index blocks.

    Block boundaries depend only on ``replications`` and ``block_size``, and
    results come back in block order, so reductions merged left to right are
    bit-identical for any worker count.
    """
    bounds = [(s, min(s + block_size, replications)) for s in range(0, replications, block_size)]
    if workers <= 1 or len(bounds) < 2:
        return [block_fn(a, b) for a, b in bounds]

    from joblib import Parallel, delayed

    return Parallel(n_jobs=workers)(delayed(block_fn)(a, b) for a, b in bounds)
