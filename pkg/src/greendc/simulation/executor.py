"""
Run independent jobs on a pool of processes.

The processes are created with the ``spawn`` context so that Windows and Linux behave the same, and
the BLAS thread pools are limited to one thread per worker so that the workers do not oversubscribe
the cores.
"""
import io
import logging
import multiprocessing
import os
import traceback
from queue import Empty
from time import perf_counter
from typing import Any, Callable, List, Optional, Sequence, Tuple

import numpy as np
from threadpoolctl import threadpool_limits


logger = logging.getLogger(__name__)

# timeout used for the queues
default_queue_timeout = 0.1

_context = multiprocessing.get_context('spawn')


def _format_exception() -> str:
    string_io = io.StringIO()
    traceback.print_exc(file=string_io)
    return string_io.getvalue()


def worker(input_queue, output_queue, function: Callable[[Any], Any], seed: int) -> None:
    """
    Execute ``function`` on the jobs of the input queue until a ``None`` job is received.

    Results are tagged with the index of their job. A job raising an exception produces a ``None`` result
    and the error text, so that jobs queued and jobs processed always match.
    """
    np.random.seed(seed)
    with threadpool_limits(limits=1, user_api='blas'):
        while True:
            item = input_queue.get()
            if item is None:
                return
            index, job = item
            try:
                output_queue.put((index, function(job), None))
            except Exception as e:
                output_queue.put((index, None, f'Exception in worker PID={os.getpid()}, E={e}\n{_format_exception()}'))


def map_jobs(function: Callable[[Any], Any],
             jobs: Sequence[Any],
             nb_workers: int = 0,
             seed: int = 0,
             timeout: Optional[float] = None) -> Tuple[List[Any], List[Optional[str]]]:
    """
    Apply ``function`` to every job.

    Args:
        function: the job function. It must be importable by the worker processes (a module level function)
        jobs: the jobs. With ``nb_workers > 0`` they must be picklable
        nb_workers: the number of worker processes. If 0, the jobs are run sequentially in this process
        seed: worker ``i`` seeds the numpy global generator with ``seed + i``. Results must not depend on it
            for the output to be deterministic
        timeout: maximum time in seconds to wait for all the results. ``None`` waits as long as a worker
            is alive

    Returns:
        a tuple (results, errors) in the order of the jobs. A failed job has a ``None`` result and its
        error text
    """
    assert nb_workers >= 0, f'nb_workers must be >= 0, got={nb_workers}'
    nb_jobs = len(jobs)
    results: List[Any] = [None] * nb_jobs
    errors: List[Optional[str]] = [None] * nb_jobs

    if nb_workers == 0 or nb_jobs <= 1:
        for index, job in enumerate(jobs):
            try:
                results[index] = function(job)
            except Exception as e:
                logger.error(f'job={index} failed, E={e}')
                errors[index] = f'E={e}\n{_format_exception()}'
        return results, errors

    nb_workers = min(nb_workers, nb_jobs)
    input_queue = _context.Queue()
    output_queue = _context.Queue()
    for index, job in enumerate(jobs):
        input_queue.put((index, job))
    for _ in range(nb_workers):
        input_queue.put(None)

    processes = []
    with threadpool_limits(limits=1, user_api='blas'):
        for i in range(nb_workers):
            p = _context.Process(
                target=worker,
                name=f'GreendcWorker-{i}',
                args=(input_queue, output_queue, function, seed + i))
            p.daemon = True
            p.start()
            processes.append(p)
    logger.debug(f'started {nb_workers} workers for {nb_jobs} jobs')

    completed = [False] * nb_jobs
    received = 0
    started = perf_counter()
    try:
        while received < nb_jobs:
            try:
                index, result, error = output_queue.get(timeout=default_queue_timeout)
            except Empty:
                if not any(p.is_alive() for p in processes) and output_queue.empty():
                    logger.error('all the workers stopped before the jobs completed')
                    break
                if timeout is not None and perf_counter() - started > timeout:
                    logger.error(f'timeout: {nb_jobs - received} jobs did not complete')
                    break
                continue
            results[index] = result
            errors[index] = error
            completed[index] = True
            if error is not None:
                logger.error(f'job={index} failed: {error}')
            received += 1
    finally:
        for p in processes:
            p.join(timeout=default_queue_timeout)
            if p.is_alive():
                p.terminate()
        input_queue.close()
        output_queue.close()

    for index in range(nb_jobs):
        if not completed[index]:
            errors[index] = 'job did not complete'
    return results, errors
