import logging
import sys
import threading
from concurrent.futures import FIRST_COMPLETED, Future, ThreadPoolExecutor, wait
from typing import Any, Callable, Hashable, Literal

from tqdm import tqdm

from arslack.backlog import Backlog
from arslack.errors import InvalidArgument
from arslack.storage import BaseStorage, InMemoryStorage

logger = logging.getLogger(__name__)

ErrorPolicy = Literal["fail", "record"]


class Runner(object):
    """Apply `fn` to every key of a backlog on a thread pool and store the results.

    Each key must carry everything its computation depends on (seeds
    included), so results do not depend on scheduling or on `workers`.
    """

    def __init__(self,
                 fn: Callable[[Hashable], Any],
                 backlog: Backlog,
                 storage: BaseStorage | None = None,
                 error_policy: ErrorPolicy = "fail",
                 workers: int = 1,
                 ):
        if error_policy not in ("fail", "record"):
            raise InvalidArgument(f"Unknown error policy `{error_policy}`.")

        self.fn = fn
        self.backlog = backlog
        self.storage = storage if storage is not None else InMemoryStorage()
        self.error_policy = error_policy
        self.workers = max(workers, 1)
        self.failures: dict[Hashable, str] = {}
        self.pbar = None
        self._lock = threading.Lock()

    def store(self, key: Hashable, value: Any) -> None:
        with self._lock:
            if isinstance(value, list):
                for v in value:
                    self.storage.save(key, v)
            else:
                self.storage.save(key, value)

    def run(self) -> BaseStorage:
        """Run until the backlog is empty and return the storage."""
        if sys.stdout.isatty():
            self.pbar = tqdm(total=self.backlog.total())
            self.pbar.update(self.backlog.total() - len(self.backlog))

        try:
            self._run()
        finally:
            if self.pbar:
                self.pbar.close()

        return self.storage

    def _run(self) -> None:
        running: set[Future] = set()

        with ThreadPoolExecutor(max_workers=self.workers) as executor:
            while not self.backlog.is_empty() or running:
                while not self.backlog.is_empty() and len(running) < self.workers:
                    running.add(executor.submit(self.run_once, self.backlog.next()))

                done, running = wait(running, return_when=FIRST_COMPLETED)

                for future in done:
                    if error := future.exception():
                        for pending in running:
                            pending.cancel()

                        raise error

    def run_once(self, key: Hashable) -> None:
        try:
            value = self.fn(key)
        except Exception as e:
            self.handle_exception(e, key)
        else:
            self.store(key, value)
        finally:
            self.update_pbar()

    def handle_exception(self, e: Exception, key: Hashable) -> None:
        """Handle the exception according to the error policy."""
        logger.error("Instance %s failed: %s", key, e)

        if self.error_policy == "fail":
            raise e

        with self._lock:
            self.failures[key] = f"{type(e).__name__}: {e}"

    def update_pbar(self) -> None:
        if self.pbar:
            with self._lock:
                self.pbar.update(1)


def run(fn: Callable[[Hashable], Any],
        backlog: Backlog,
        storage: BaseStorage | None = None,
        error_policy: ErrorPolicy = "fail",
        workers: int = 1) -> tuple[BaseStorage, dict[Hashable, str]]:
    """Process every key of `backlog`; return the storage and the recorded failures."""
    runner = Runner(fn, backlog, storage, error_policy, workers)
    return runner.run(), runner.failures
