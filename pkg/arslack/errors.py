

class ArsError(Exception):
    pass


class InvalidArgument(ArsError, ValueError):
    pass


class NumericOverflow(ArsError, ArithmeticError):

    def __init__(self, message, step: int | None = None):
        super().__init__(message)
        self.step = step


class FixableError(ArsError):

    def __init__(self, error_key, **kwargs):
        super().__init__(error_key)
        self.error_key = error_key
        self.data = kwargs

    def __eq__(self, other):
        if isinstance(other, self.__class__):
            return self.error_key == other.error_key

        return super().__eq__(other)

    def __hash__(self):
        return hash((self.__class__, self.error_key))


class SingularMatrix(FixableError):
    """Normal equations could not be solved at the requested ridge."""

    def __init__(self, ridge: float = 0.0, condition: float = 0.0):
        super().__init__("singular", ridge=ridge, condition=condition)

    def __str__(self):
        return (f"Singular normal equations at ridge={self.data['ridge']:g} "
                f"(condition hint {self.data['condition']:.3g}); pass a positive ridge.")


class SeriesFormatError(ArsError):

    def __init__(self, message, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class UsageError(ArsError):
    pass


class BacklogError(ArsError):
    pass


class EmptyBacklog(BacklogError):
    pass


class StorageNotAvailable(ArsError):
    pass


class DataIsNotAllowed(ArsError):
    pass
