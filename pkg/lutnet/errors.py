class LutnetError(Exception):
    """
    Base class for compiler errors.
    The message is prefixed with the module that raised it, e.g. "transform: capacity error: ...".
    """

    kind = "error"
    exit_code = 1

    def __init__(self, message: str, module: str = "lutnet"):
        self.module = module
        self.detail = message
        super().__init__(f"{module}: {self.kind}: {message}")


class DomainError(LutnetError, ValueError):
    kind = "domain error"
    exit_code = 6


class StateError(LutnetError):
    kind = "state error"
    exit_code = 4


class StructureError(LutnetError):
    kind = "structure error"
    exit_code = 4


class CapacityError(LutnetError):
    kind = "capacity error"
    exit_code = 5


class NumericError(LutnetError):
    kind = "numeric error"
    exit_code = 6


class InputRangeError(LutnetError, ValueError):
    kind = "input error"
    exit_code = 6


class ModelParseError(LutnetError):
    """Model file could not be parsed. `location` is "line X, column Y" or a field path."""

    kind = "parse error"
    exit_code = 3

    def __init__(self, message: str, location: str = "", module: str = "ir"):
        self.location = location
        text = f"{location}: {message}" if location else message
        super().__init__(text, module=module)
