"""Exception hierarchy shared by all modules.

Every error carries the module and operation that raised it and the text of
the violated precondition, so the CLI can emit a machine-readable record.
"""

from __future__ import annotations


class QadError(Exception):
    """Base class. ``exit_code`` is what the CLI returns for this error."""

    exit_code = 3

    def __init__(self, message: str, *, module: str = "", operation: str = "",
                 precondition: str = "", **details):
        super().__init__(message)
        self.message = message
        self.module = module
        self.operation = operation
        self.precondition = precondition or message
        self.details = details

    def to_dict(self) -> dict:
        out = {
            "error": type(self).__name__,
            "module": self.module,
            "operation": self.operation,
            "precondition": self.precondition,
            "message": self.message,
        }
        if self.details:
            out["details"] = {k: _jsonable(v) for k, v in self.details.items()}
        return out


class DimensionError(QadError, ValueError):
    exit_code = 2


class InvariantError(QadError, ValueError):
    """A constructed object violates its type invariant (norm, trace, ...)."""


class MeasurementImpossible(QadError):
    """Projective outcome with probability below the post-selection floor."""


class DegenerateError(QadError):
    """Centroid / centered vector / covariance does not exist for this data."""


class UnsupportedError(QadError, TypeError):
    """Operation not defined for this kind of source (e.g. U_C for mixed sets)."""

    exit_code = 2


class SchemaError(QadError, ValueError):
    exit_code = 2


class ConfigError(QadError, ValueError):
    exit_code = 2


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, complex):
        return [value.real, value.imag]
    if hasattr(value, "item"):
        return _jsonable(value.item())
    return value
