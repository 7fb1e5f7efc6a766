"""Exception hierarchy shared by the pipeline stages."""


class AdlError(Exception):
    """Base class for every error raised by this package."""


class FormatError(AdlError, ValueError):
    """A file does not follow the expected container or record layout."""


class UnsupportedFormatError(FormatError):
    """Well-formed input in an encoding this package does not decode."""


class CorruptionError(FormatError):
    """A record or checkpoint payload ends early or is inconsistent."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class EmptyInputError(AdlError, ValueError):
    pass


class InvalidParamsError(AdlError, ValueError):
    pass


class CannotBalanceError(AdlError, ValueError):
    pass


class InsufficientNeighborsError(AdlError, ValueError):
    def __init__(self, class_id, size, k):
        super().__init__(
            f"class {class_id} has {size} members, SMOTE needs more than k={k}"
        )
        self.class_id = class_id


class NumericError(AdlError, ArithmeticError):
    pass


class SchemaError(AdlError, ValueError):
    """Shapes or class ids disagree between a model and its data."""


class TooShortError(AdlError, ValueError):
    pass
