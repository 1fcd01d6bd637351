"""Exception types. Each carries a short machine-readable ``code`` used by the CLI."""


class ChfDiffError(Exception):
    code = "E_GENERIC"


class ConfigError(ChfDiffError, ValueError):
    code = "E_CONFIG"


class SchemaError(ChfDiffError, ValueError):
    code = "E_SCHEMA"


class DataParseError(ChfDiffError, ValueError):
    code = "E_PARSE"

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class DomainError(ChfDiffError, ValueError):
    code = "E_DOMAIN"


class ShapeError(ChfDiffError, ValueError):
    code = "E_SHAPE"


class CheckpointError(ChfDiffError, ValueError):
    code = "E_CHECKPOINT"


class NonFiniteError(ChfDiffError, FloatingPointError):
    """Raised when a loss, gradient or parameter stops being finite."""

    code = "E_NONFINITE"


class InputError(ChfDiffError, FileNotFoundError):
    code = "E_INPUT"
