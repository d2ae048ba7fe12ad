import abc
import csv
import os
from collections import defaultdict, deque
from functools import wraps
from typing import Any, Hashable, Iterable, Sequence, TextIO, Tuple

from arslack.errors import DataIsNotAllowed, StorageNotAvailable


class BaseStorage(abc.ABC):
    """Base class for result storages.

    Stores dictionary-like records under a key. A key does not have to be
    unique: one experiment instance saves one record per forecast horizon.

    Usage:

    ```
    with InMemoryStorage() as storage:
        storage.save(0, {"k": 5, "mse_ar": 0.1})
        storage.save_multiple([1, 2], [{"k": 5, "mse_ar": 0.2}, {"k": 5, "mse_ar": 0.3}])

        for key, record in storage.iter_items():
            print(key, record)
    ```
    """

    @abc.abstractmethod
    def save(self, key: Hashable, data: dict[str, Any]) -> None:
        """Save to storage"""
        raise NotImplementedError

    def save_multiple(self, keys: Iterable[Hashable], dicts: Iterable[dict[str, Any]]) -> None:
        for key, value in zip(keys, dicts):
            self.save(key, value)

    def save_from_iterable(self, data_iterable: Iterable[Tuple[Hashable, dict[str, Any]]]) -> None:
        for key, value in data_iterable:
            self.save(key, value)

    @abc.abstractmethod
    def commit(self) -> None:
        """Flush buffered records."""
        raise NotImplementedError

    @abc.abstractmethod
    def keys(self) -> Iterable[Hashable]:
        raise NotImplementedError

    @abc.abstractmethod
    def iter_values(self, key: Hashable | None = None) -> Iterable[dict[str, Any]]:
        """Return all records. If `key` is given, return only records saved with this key."""
        raise NotImplementedError

    @abc.abstractmethod
    def iter_items(self) -> Iterable[Tuple[Hashable, dict[str, Any]]]:
        """Return all records as key, record tuples."""
        raise NotImplementedError

    def __enter__(self) -> "BaseStorage":
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        self.commit()


class InMemoryStorage(BaseStorage):
    """Non-persistent storage, used by the experiment runner."""

    def __init__(self):
        self.data = defaultdict(deque)

    def save(self, key: Hashable, data: dict[str, Any]) -> None:
        self.data[key].append(data)

    def commit(self) -> None:
        pass

    def keys(self) -> Iterable[Hashable]:
        return self.data.keys()

    def iter_values(self, key: Hashable | None = None) -> Iterable[dict[str, Any]]:
        if key is not None:
            yield from self.data.get(key, ())
        else:
            for value in self.data.values():
                yield from value

    def iter_items(self) -> Iterable[Tuple[Hashable, dict[str, Any]]]:
        for key, values in self.data.items():
            for value in values:
                yield key, value


def check_fp_availability(fn):

    @wraps(fn)
    def wrapper(self, *args, **kwargs):
        if self.file_pointer is None:
            raise StorageNotAvailable("File was not opened. Did you use a `with` statement?")

        return fn(self, *args, **kwargs)

    return wrapper


class CsvFileStorage(BaseStorage):
    """Storage writing one CSV row per record with a fixed header.

    The key is written to the column `key_field`, which must be one of
    `fieldnames` and must not appear in the records themselves. Values read
    back are strings.
    """

    def __init__(self, file_path: str, fieldnames: Sequence[str], key_field: str, overwrite: bool = False):
        if key_field not in fieldnames:
            raise DataIsNotAllowed(f"Key column `{key_field}` is not among the fieldnames.")

        self.file_path: str = file_path
        self.fieldnames: list[str] = list(fieldnames)
        self.key_field = key_field
        self.overwrite = overwrite
        self.file_pointer: TextIO | None = None
        self.csv_writer: csv.DictWriter | None = None

    @check_fp_availability
    def save(self, key: Hashable, data: dict[str, Any]) -> None:
        if self.key_field in data:
            raise DataIsNotAllowed(f"The column `{self.key_field}` is reserved for the key.")

        self.file_pointer.seek(0, 2)
        row = dict(data)
        row[self.key_field] = key

        try:
            self.csv_writer.writerow(row)
        except ValueError as e:
            raise DataIsNotAllowed(str(e))

    @check_fp_availability
    def commit(self) -> None:
        self.file_pointer.flush()

    def _rows(self) -> Iterable[dict[str, str]]:
        self.file_pointer.seek(0)
        reader = csv.DictReader(self.file_pointer)
        yield from reader

    @check_fp_availability
    def keys(self) -> Iterable[str]:
        """Return all keys in storage, scanning the whole file."""
        seen = []

        for row in self._rows():
            if row[self.key_field] not in seen:
                seen.append(row[self.key_field])

        return seen

    @check_fp_availability
    def iter_values(self, key: Hashable | None = None) -> Iterable[dict[str, Any]]:
        for row_key, row in self.iter_items():
            if key is None or row_key == str(key):
                yield row

    @check_fp_availability
    def iter_items(self) -> Iterable[Tuple[str, dict[str, Any]]]:
        for row in self._rows():
            key = row.pop(self.key_field)
            yield key, row

    def __enter__(self) -> "CsvFileStorage":
        flags = os.O_RDWR | os.O_CREAT | (os.O_TRUNC if self.overwrite else 0)
        self.file_pointer = os.fdopen(os.open(self.file_path, flags), "r+", encoding="utf-8", newline="")
        self.csv_writer = csv.DictWriter(self.file_pointer, fieldnames=self.fieldnames, lineterminator="\n")
        self.file_pointer.seek(0, 2)

        if self.file_pointer.tell() == 0:
            self.csv_writer.writeheader()
        else:
            self.file_pointer.seek(0)
            header = next(csv.reader(self.file_pointer))

            if header != self.fieldnames:
                self.file_pointer.close()
                self.file_pointer = None
                raise DataIsNotAllowed(f"Existing header {header} differs from {self.fieldnames}.")

        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        self.commit()
        self.file_pointer.close()
        self.file_pointer = None
        self.csv_writer = None
