"""Exception hierarchy shared by every module.

Each family maps onto one CLI exit code: schema/config problems exit 2,
transport failures exit 3 and empty (sub)spaces exit 4.
"""

from __future__ import annotations


class PrincipleNasError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class SchemaError(PrincipleNasError, ValueError):
    exit_code = 2


class ParseError(SchemaError):
    """An architecture key could not be parsed."""


class UnknownName(SchemaError):
    def __init__(self, names, where: str = ""):
        self.names = list(names)
        suffix = f" ({where})" if where else ""
        super().__init__(f"unknown name(s) {self.names}{suffix}")


class InvalidArchitecture(SchemaError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class DuplicateKey(SchemaError):
    def __init__(self, key: str):
        self.key = key
        super().__init__(f"duplicate architecture key {key!r}")


class UndecodableKey(SchemaError):
    def __init__(self, key: str, reason: str):
        self.key = key
        super().__init__(f"key {key!r} does not decode: {reason}")


class ConfigError(SchemaError):
    pass


class TemplateMissing(SchemaError):
    pass


class TooLarge(PrincipleNasError, ValueError):
    exit_code = 2

    def __init__(self, cardinality: int, cap: int):
        self.cardinality = cardinality
        self.cap = cap
        super().__init__(f"space has {cardinality} architectures, cap is {cap}")


class ConstraintEmpty(PrincipleNasError, ValueError):
    """A refinement leaves some layer without any valid decision."""

    exit_code = 4

    def __init__(self, layer: int, reason: str = "no allowed operators"):
        self.layer = layer
        super().__init__(f"layer {layer}: {reason}")


class EmptyLayer(ConstraintEmpty):
    pass


class ArityUnsatisfiable(ConstraintEmpty):
    def __init__(self, layer: int, reason: str = "allowed sources cannot meet source arity"):
        super().__init__(layer, reason)


class EmptyRefinedSpace(PrincipleNasError):
    exit_code = 4

    def __init__(self, cause: Exception, principle: dict):
        self.cause = cause
        self.principle = principle
        super().__init__(f"principle yields an empty search space: {cause}")


class EmptySubspace(PrincipleNasError):
    exit_code = 4


class UnknownArchitecture(PrincipleNasError, KeyError):
    exit_code = 2

    def __init__(self, key: str):
        self.key = key
        super().__init__(key)

    def __str__(self) -> str:
        return f"architecture {self.key!r} not in benchmark table"


class PartialTable(PrincipleNasError):
    exit_code = 2


class TransportError(PrincipleNasError):
    exit_code = 3

    def __init__(self, message: str, status: int | None = None):
        self.status = status
        super().__init__(message)


class SchemaViolation(PrincipleNasError):
    """An LLM reply parsed but did not describe a valid principle."""

    exit_code = 2


class MalformedAfterRetries(PrincipleNasError):
    exit_code = 2

    def __init__(self, attempts: int, last_reply: str, last_error: str):
        self.attempts = attempts
        self.last_reply = last_reply[:500]
        self.last_error = last_error
        super().__init__(
            f"no valid principle after {attempts} attempt(s): {last_error}; "
            f"last reply starts {self.last_reply[:120]!r}"
        )
