from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Sequence


def pmap(fn: Callable, tasks: Sequence, jobs: int = 1) -> List:
    """Order-preserving map; ``jobs > 1`` fans out to worker processes.

    Every task carries its own pre-derived seed, so results do not depend on
    scheduling.
    """
    tasks = list(tasks)
    if jobs is None or jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(fn, tasks))
