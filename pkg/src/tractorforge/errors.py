"""Named error types raised across the package."""
from __future__ import annotations


class TractorForgeError(Exception):
    """Base class for all library errors."""


class DivisionByZeroConstant(TractorForgeError, ZeroDivisionError):
    pass


class SlotMismatch(TractorForgeError, ValueError):
    pass


class SingularMetric(TractorForgeError, ValueError):
    pass


class DepthExceeded(TractorForgeError):
    pass


class DSLSyntaxError(TractorForgeError, ValueError):
    """Parse failure carrying the byte offset and the set of expected tokens."""

    def __init__(self, offset: int, expected: set[str], found: str = ""):
        self.offset = offset
        self.expected = frozenset(expected)
        self.found = found
        want = ", ".join(sorted(self.expected))
        super().__init__(f"syntax error at byte {offset}: expected one of {{{want}}}, found {found!r}")


class UnknownIdentifier(TractorForgeError, KeyError):
    def __init__(self, name: str, offset: int | None = None):
        self.name = name
        self.offset = offset
        super().__init__(name)

    def __str__(self) -> str:
        where = "" if self.offset is None else f" at byte {self.offset}"
        return f"unknown identifier {self.name!r}{where}"


class CriticalPoint(TractorForgeError):
    pass


class Degenerate(TractorForgeError):
    pass


class SingularSystem(TractorForgeError):
    pass


class RankDeficient(TractorForgeError):
    pass


class ZeroScale(TractorForgeError):
    pass


class NotProjectable(TractorForgeError):
    def __init__(self, residual: float):
        self.residual = float(residual)
        super().__init__(f"section is not constant along the fibre (residual {self.residual:.3e})")


class NotKilling(TractorForgeError):
    def __init__(self, residual: float):
        self.residual = float(residual)
        super().__init__(f"vector field is not conformal Killing (residual {self.residual:.3e})")


class ConfigError(TractorForgeError, ValueError):
    pass


class ManifoldError(TractorForgeError):
    pass
