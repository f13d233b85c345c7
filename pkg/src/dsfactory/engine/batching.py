"""
Batched UDF execution with bounded read-ahead.

Sample fetches run ahead of UDF processing by at most `read_ahead` batches.
Each worker thread owns its own UDF instance, and results are reassembled in
batch order no matter which worker finishes first.
"""

import logging
import threading
from collections import deque
from concurrent.futures import ThreadPoolExecutor

from dsfactory.engine.subprocess_runner import SubprocessRunner
from dsfactory.engine.udf import BuiltinRunner

logger = logging.getLogger(__name__)


def make_runner(spec, timeout):
    if spec.mode == "builtin":
        return BuiltinRunner(spec)
    return SubprocessRunner(spec, timeout=timeout)


class RunnerPool:
    """Lazily starts one UDF runner per thread and tears them all down."""

    def __init__(self, spec, timeout):
        self.spec = spec
        self.timeout = timeout
        self._local = threading.local()
        self._runners = []
        self._lock = threading.Lock()

    def get(self):
        runner = getattr(self._local, "runner", None)
        if runner is None:
            runner = make_runner(self.spec, self.timeout)
            with self._lock:
                self._runners.append(runner)
            runner.start()
            self._local.runner = runner
        return runner

    def close(self, failed=False):
        runners, self._runners = self._runners, []
        first_error = None
        for runner in runners:
            if failed:
                if hasattr(runner, "kill"):
                    runner.kill()
                continue
            try:
                runner.close()
            except Exception as e:
                first_error = first_error or e
        if first_error is not None:
            raise first_error


def chunk(indices, size):
    return [indices[i:i + size] for i in range(0, len(indices), size)]


def map_batches(batches, fetch, process, workers=1, read_ahead=4):
    """
    Fetch and process batches, keeping at most read_ahead + workers in flight.

    Args:
        batches (list): Batch descriptions (for example lists of row indices)
        fetch (callable): batch -> fetched inputs
        process (callable): (batch, fetched) -> result
        workers (int): Processing threads
        read_ahead (int): Batches fetched ahead of processing

    Returns:
        list: One result per batch, in batch order
    """
    results = [None] * len(batches)
    if not batches:
        return results
    window = max(1, read_ahead) + max(1, workers)

    with ThreadPoolExecutor(max_workers=1, thread_name_prefix="df-fetch") as fetch_pool, \
            ThreadPoolExecutor(max_workers=max(1, workers), thread_name_prefix="df-udf") as udf_pool:
        in_flight = deque()

        def drain_one():
            index, future = in_flight.popleft()
            results[index] = future.result()

        try:
            for index, batch in enumerate(batches):
                fetched = fetch_pool.submit(fetch, batch)
                in_flight.append((index, udf_pool.submit(lambda b=batch, f=fetched: process(b, f.result()))))
                if len(in_flight) >= window:
                    drain_one()
            while in_flight:
                drain_one()
        except BaseException:
            for _, future in in_flight:
                future.cancel()
            raise
    return results
