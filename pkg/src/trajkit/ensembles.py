"""Reproducible trajectory ensembles: seeding, blocking and reduction.

Every trajectory owns a counter-based random stream (Philox) keyed by a
64-bit seed that is a pure function of the master seed and the trajectory
index.  Trajectories are processed in fixed-size blocks; block boundaries
depend only on the ensemble size, never on the worker count, and the
final reduction runs in trajectory-index order.  Together these make
ensemble means bit-identical for any number of workers.
"""

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BLOCK_SIZE",
    "TrajectoryRecord",
    "EnsembleResult",
    "trajectory_seed",
    "trajectory_rng",
    "iter_blocks",
    "map_blocks",
    "reduce_blocks",
]

BLOCK_SIZE = 256


@dataclass
class TrajectoryRecord:
    """One stochastic trajectory: observables on the output grid plus jump log."""

    seed: int
    times: np.ndarray
    observables: dict
    jump_times: np.ndarray
    jump_channels: np.ndarray
    final_state: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_jumps(self) -> int:
        return len(self.jump_times)


@dataclass
class EnsembleResult:
    """Trajectory-averaged observables with standard errors and seed provenance."""

    n_traj: int
    times: np.ndarray
    mean: dict
    stderr: dict
    master_seed: int
    seeds: np.ndarray
    meta: dict = field(default_factory=dict)


def trajectory_seed(master_seed: int, index: int) -> int:
    """64-bit per-trajectory seed, a pure function of (master seed, index)."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


def trajectory_rng(seed: int) -> np.random.Generator:
    """Counter-based generator for one trajectory stream."""
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)))


def iter_blocks(n_traj: int, block_size: int = BLOCK_SIZE):
    """Fixed-size index blocks [(start, stop), ...] covering range(n_traj)."""
    return [
        (start, min(start + block_size, n_traj))
        for start in range(0, n_traj, block_size)
    ]


def _pool_init(worker_fn, shared):
    global _WORKER_FN, _WORKER_SHARED
    _WORKER_FN = worker_fn
    _WORKER_SHARED = shared


def _pool_call(block):
    return _WORKER_FN(_WORKER_SHARED, block)


def map_blocks(worker_fn, shared, blocks, workers: int = 1):
    """Run ``worker_fn(shared, block)`` over blocks, optionally in a pool.

    Results come back in block order regardless of completion order, so
    reductions downstream are worker-count independent.
    """
    if workers <= 1 or len(blocks) <= 1:
        return [worker_fn(shared, blk) for blk in blocks]
    workers = min(workers, len(blocks), os.cpu_count() or 1)
    if workers <= 1:
        return [worker_fn(shared, blk) for blk in blocks]
    with ProcessPoolExecutor(
        max_workers=workers, initializer=_pool_init, initargs=(worker_fn, shared)
    ) as pool:
        return list(pool.map(_pool_call, blocks))


def reduce_blocks(block_results, n_traj: int):
    """Combine per-block (B, T) channel arrays into mean and standard error.

    Accumulation runs block by block in index order with per-block sums
    taken along axis 0, a fixed operation order for a fixed ensemble size.
    """
    names = list(block_results[0].keys())
    sums = {}
    sumsqs = {}
    for name in names:
        width = block_results[0][name].shape[1]
        sums[name] = np.zeros(width)
        sumsqs[name] = np.zeros(width)
    for block in block_results:
        for name in names:
            arr = block[name]
            sums[name] += np.add.reduce(arr, axis=0)
            sumsqs[name] += np.add.reduce(arr * arr, axis=0)
    mean = {}
    stderr = {}
    for name in names:
        m = sums[name] / n_traj
        mean[name] = m
        if n_traj > 1:
            var = (sumsqs[name] - n_traj * m * m) / (n_traj - 1)
            stderr[name] = np.sqrt(np.clip(var, 0.0, None) / n_traj)
        else:
            stderr[name] = np.full_like(m, np.nan)
    return mean, stderr
