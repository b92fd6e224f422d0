from typing import Iterable, Optional, Sequence


class VinegenError(Exception):
    exit_code = 2


class DataError(VinegenError):
    exit_code = 2


class DegenerateInputError(DataError):
    pass


class DomainError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class StructureError(DataError):
    pass


class FormatError(DataError):
    def __init__(self, message: str, offset: Optional[int] = None) -> None:
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class HeaderValidationError(FormatError):
    def __init__(self, expected: str, actual: Sequence[str] | None) -> None:
        self.actual = list(actual or [])
        message = (
            "Invalid CSV header. "
            f"Expected {expected}, received {self.actual}"
        )
        super().__init__(message)


class BundleFormatError(FormatError):
    pass


class UnknownLabelError(DataError):
    def __init__(self, label: object, known: Iterable[object]) -> None:
        self.label = label
        self.known = sorted(known)
        super().__init__(f"Unknown label {label!r}; known labels: {self.known}")


class NumericError(VinegenError):
    exit_code = 3


class TrainingDivergedError(NumericError):
    def __init__(self, epoch: int, learning_rate: float) -> None:
        self.epoch = epoch
        self.learning_rate = learning_rate
        super().__init__(
            f"Loss became NaN at epoch {epoch}; "
            f"try a smaller learning rate than {learning_rate:g}"
        )
