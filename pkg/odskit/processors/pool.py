"""Deterministic per-input seeding and process-pool fan-out."""

import logging
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Sequence, TypeVar

import numpy as np

logger = logging.getLogger("odskit")

T = TypeVar("T")
R = TypeVar("R")


@dataclass
class EvalInputs:
    """Correctly classified test inputs, keyed by their test-set index."""
    ids: np.ndarray
    features: np.ndarray
    labels: np.ndarray

    def __len__(self):
        return int(self.ids.size)


def input_seed(master_seed: int, name: str, input_id: int) -> np.random.SeedSequence:
    """Seed for one (campaign, input) pair, independent of worker scheduling."""
    return np.random.SeedSequence([int(master_seed), zlib.crc32(name.encode("utf-8")), int(input_id)])


def fan_out(worker: Callable[[T], R], tasks: Sequence[T], jobs: int = 1) -> List[R]:
    """Map ``worker`` over ``tasks``; results keep task order whatever ``jobs`` is."""
    if jobs <= 1 or len(tasks) <= 1:
        return [worker(task) for task in tasks]
    chunksize = max(1, len(tasks) // (4 * jobs))
    logger.debug(f"Fanning {len(tasks)} tasks out to {jobs} workers (chunks of {chunksize})")
    with ProcessPoolExecutor(max_workers=jobs) as executor:
        return list(executor.map(worker, tasks, chunksize=chunksize))
