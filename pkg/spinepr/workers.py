"""Process-pool fan-out shared by the sector solver, the Wigner backend and the sweeps

Functions:
    parallel_map
    effective_workers
"""
import logging
import multiprocessing as mp
from multiprocessing.pool import AsyncResult
from typing import Any, Callable, Iterable, List

log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())


def effective_workers(workers: int, jobs: int) -> int:
    if workers <= 1 or jobs <= 1:
        return 1
    return max(1, min(workers, jobs, mp.cpu_count()))


def parallel_map(func: Callable[[Any], Any], items: Iterable[Any], workers: int = 1) -> List[Any]:
    """Applies func to every item, returning the results in submission order.

    With workers <= 1 everything runs in the calling process. Otherwise a bounded
    pool of processes is spawned; func and the items must be picklable.
    """
    jobs = list(items)
    processes = effective_workers(workers, len(jobs))
    if processes == 1:
        return [func(job) for job in jobs]
    results: List[AsyncResult] = []
    log.debug("spawning a pool of %s processes for %s jobs", processes, len(jobs))
    with mp.Pool(processes=processes) as pool:
        for index, job in enumerate(jobs):
            log.debug("assigning job %s to a process in the pool", index)
            results.append(pool.apply_async(func, (job,)))
        log.debug("closing workers")
        pool.close()
        log.debug("waiting for workers termination")
        pool.join()
        log.debug("workers terminated")
        return [result.get() for result in results]
