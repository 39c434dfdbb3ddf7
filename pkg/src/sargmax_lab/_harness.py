"""Seeded replication runner shared by the Monte Carlo experiments."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable

from .processes import Rng, mix_seed

__all__ = ["ExperimentConfig", "ExperimentFailure", "Replications", "run_replications", "resolve_threads"]

# a run fails when more than this fraction of replications raise
FAILURE_FRACTION = 0.01


class ExperimentFailure(RuntimeError):
    """Too many replications failed."""


@dataclass(frozen=True)
class ExperimentConfig:
    master_seed: int
    replications: int
    params: dict = field(default_factory=dict)
    threads: int | None = None
    outputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class Replications:
    values: list
    failures: list  # (index, message)

    @property
    def ok_values(self):
        return [v for v in self.values if v is not None]


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        env = os.environ.get("SARGMAX_LAB_THREADS")
        threads = int(env) if env else 1
    return max(1, int(threads))


def _run_block(task, params, master_seed, indices):
    out = []
    for r in indices:
        try:
            out.append((r, task(params, Rng(mix_seed(master_seed, r))), None))
        except Exception as exc:  # recorded per replication
            out.append((r, None, f"{type(exc).__name__}: {exc}"))
    return out


def run_replications(config: ExperimentConfig, task: Callable[[dict, Rng], Any]) -> Replications:
    """Run ``task(params, rng_r)`` for every replication ``r``.

    Each replication owns the stream seeded by ``mix_seed(master_seed, r)``,
    so results depend only on the config. Output is ordered by ``r``.
    """
    threads = resolve_threads(config.threads)
    idx = list(range(config.replications))
    if threads == 1 or config.replications == 1:
        rows = _run_block(task, config.params, config.master_seed, idx)
    else:
        blocks = [idx[i::threads * 4] for i in range(threads * 4)]
        rows = []
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_run_block, task, config.params, config.master_seed, b) for b in blocks if b]
            for fut in futures:
                rows.extend(fut.result())
        rows.sort(key=lambda row: row[0])
    values = [v for _, v, _ in rows]
    failures = [(r, msg) for r, _, msg in rows if msg is not None]
    if len(failures) > FAILURE_FRACTION * config.replications:
        raise ExperimentFailure(
            f"{len(failures)} of {config.replications} replications failed; first: {failures[0][1]}"
        )
    return Replications(values, failures)
