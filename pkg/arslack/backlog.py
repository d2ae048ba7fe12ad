from typing import Hashable, List

from arslack.errors import EmptyBacklog


class Backlog(object):
    """First-in first-out queue of experiment instance keys."""

    def __init__(self, *keys: Hashable):
        """Initialize the Backlog

        :param keys: Keys queued in order; duplicates are dropped.
        """
        self._queue: List[Hashable] = []
        self.seen: set[Hashable] = set()
        self.add_multiple(*keys)

    def add(self, key: Hashable) -> None:
        """Add a key to the backlog unless it was added before."""
        if key not in self.seen:
            self._queue.append(key)
            self.seen.add(key)

    def add_multiple(self, *keys: Hashable) -> None:
        for key in keys:
            self.add(key)

    def next(self) -> Hashable:
        """Remove and return the oldest key."""
        try:
            return self._queue.pop(0)
        except IndexError:
            raise EmptyBacklog

    def is_empty(self) -> bool:
        return len(self._queue) == 0

    def __len__(self):
        """Return the number of keys still queued."""
        return len(self._queue)

    def total(self) -> int:
        """Return the number of keys ever added, processed or not."""
        return len(self.seen)
