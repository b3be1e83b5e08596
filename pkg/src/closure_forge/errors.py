"""Exception hierarchy shared across the package."""


class ClosureForgeError(Exception):
    """Base class for all package errors."""


class MpsParseError(ClosureForgeError, ValueError):
    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class ConversionError(ClosureForgeError, ValueError):
    pass


class MappingError(ClosureForgeError):
    """A standard-form cut cannot be expressed over the original variables."""


class NumericalError(ClosureForgeError, ArithmeticError):
    pass


class CollectionError(ClosureForgeError):
    def __init__(self, step, status, message=""):
        self.step = step
        self.status = status
        super().__init__(f"{step}: LP {status}" + (f" ({message})" if message else ""))


class SignatureMismatch(ClosureForgeError, ValueError):
    pass


class FamilyError(ClosureForgeError):
    pass


class OracleRefusal(ClosureForgeError):
    """Instance too large (or unbounded) for enumeration."""
