"""Deterministic stream splitting for replicate-level parallelism.

Replicates are grouped into fixed-size blocks. Block ``b`` of a run with
master seed ``seed`` draws from

    numpy.random.default_rng(numpy.random.SeedSequence(entropy=seed, spawn_key=(tag, b)))

where ``tag`` names the statistic family. Because the block size never
depends on the worker count, results are identical for any ``--workers``.
"""
from __future__ import annotations

import hashlib
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

import numpy as np

BLOCK_SIZE = 1000
DEFAULT_SEED = 20240101


def tag_key(tag: str) -> int:
    """Stable 32-bit integer for a stream tag."""
    return int.from_bytes(hashlib.sha256(tag.encode()).digest()[:4], "little")


def stream(seed: int, tag: str = "", block: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(tag_key(tag), int(block))))


def block_sizes(total: int, block_size: int = BLOCK_SIZE) -> list[int]:
    full, rest = divmod(int(total), block_size)
    return [block_size] * full + ([rest] if rest else [])


def _run_block(args):
    fn, seed, tag, b, n, kwargs = args
    return fn(stream(seed, tag, b), n, **kwargs)


def map_blocks(
    fn: Callable,
    total: int,
    seed: int,
    tag: str,
    *,
    workers: int = 1,
    block_size: int = BLOCK_SIZE,
    **kwargs,
) -> list:
    """Call ``fn(rng, n, **kwargs)`` on every block and return results in block order.

    ``fn`` must be a module-level function when ``workers > 1``.
    """
    sizes = block_sizes(total, block_size)
    jobs = [(fn, seed, tag, b, n, kwargs) for b, n in enumerate(sizes)]
    if workers <= 1 or len(jobs) <= 1:
        return [_run_block(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_block, jobs))


def concat_blocks(parts: Sequence) -> np.ndarray:
    parts = [np.asarray(p) for p in parts]
    return np.concatenate(parts) if parts else np.empty(0)


def resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return int(seed)
    env = os.environ.get("SBTREES_SEED")
    return int(env) if env else DEFAULT_SEED


def resolve_workers(workers: int | None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("SBTREES_WORKERS")
    return max(1, int(env)) if env else 1
