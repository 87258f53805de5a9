"""Process pool for independent numerical jobs."""
import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Sequence, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(func: Callable[[T], R], jobs: Sequence[T], n_jobs: int = 1) -> List[R]:
    """Apply ``func`` to every job; results come back in job order.

    ``func`` and the jobs must be picklable when ``n_jobs > 1``. Job
    boundaries are chosen by the caller, so the arithmetic does not depend
    on ``n_jobs``.
    """
    jobs = list(jobs)
    if n_jobs <= 1 or len(jobs) <= 1:
        return [func(job) for job in jobs]
    workers = min(n_jobs, len(jobs))
    logger.debug("Dispatching jobs to process pool", extra={"jobs": workers, "n_points": len(jobs)})
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, jobs))
