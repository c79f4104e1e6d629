"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class CgOutlierError(Exception):
    """Base class for all analysis errors raised by this package."""


class NotDecomposable(CgOutlierError):
    pass


class UnknownVertex(CgOutlierError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return Exception.__str__(self)


class UnknownVariable(CgOutlierError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class ArityMismatch(CgOutlierError, ValueError):
    pass


class InconsistentTables(CgOutlierError, ValueError):
    pass


class SingularDesign(CgOutlierError, ArithmeticError):
    pass


class InsufficientData(CgOutlierError, ValueError):
    pass


class UnseenCell(CgOutlierError, ValueError):
    pass


class UnseenLevel(CgOutlierError, ValueError):
    pass


class ParseError(CgOutlierError, ValueError):
    pass


class MissingValue(ParseError):
    pass


UnknownLevel = UnseenLevel
