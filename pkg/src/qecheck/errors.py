"""Exception types shared across the engine.

Expression-level errors carry a byte-offset span into the offending source
string; geometry/check errors carry the point (coordinate tuple) where the
failure occurred whenever one is available.
"""

from __future__ import annotations


class QeCheckError(Exception):
    """Base class for all engine errors."""


# --- expression DSL ---------------------------------------------------------

class ExprError(QeCheckError):
    """Base for expression parsing/evaluation errors. `span` is a (start, end)
    byte-offset pair into the source text, or None when no source exists."""

    def __init__(self, message, span=None):
        super().__init__(message)
        self.span = span


class ParseError(ExprError):
    """Malformed expression source (syntax error)."""


class UnknownNameError(ExprError):
    def __init__(self, name, span=None):
        super().__init__(f"unknown identifier '{name}'", span)
        self.name = name


class NonIntegerExponentError(ExprError):
    """`^` exponent is not an integer or simple rational literal."""


class DomainError(ExprError):
    """Evaluation hit log(x<=0), sqrt(x<0), or division by zero."""

    def __init__(self, message, node=None, point=None):
        super().__init__(message)
        self.node = node
        self.point = point


# --- geometry ---------------------------------------------------------------

class SingularMetricError(QeCheckError):
    def __init__(self, point=None):
        super().__init__(f"metric not positive definite at point {point}")
        self.point = point


class NonPositiveUError(QeCheckError):
    def __init__(self, point=None, value=None):
        super().__init__(f"potential u <= 0 at point {point} (u={value})")
        self.point = point
        self.value = value


class FormUnavailableError(QeCheckError):
    """Requested a finite-m quantity on an m = infinity instance (or the
    u-form on such an instance)."""


class DimensionMismatchError(QeCheckError):
    pass


class MDegenerateError(QeCheckError):
    """Identity requires m != 1."""


class NotClosedSurfaceError(QeCheckError):
    """Chart lacks the periodicity/closure declarations of a closed surface."""


class DegenerateGradientError(QeCheckError):
    def __init__(self, point=None):
        super().__init__(f"|grad u| below threshold at point {point}")
        self.point = point


class OddDimensionError(QeCheckError):
    pass


# --- warped products --------------------------------------------------------

class InvalidFiberError(QeCheckError):
    pass


class NonIntegerMError(QeCheckError):
    pass


class MuNotConstantError(QeCheckError):
    def __init__(self, spread, tol):
        super().__init__(f"fiber constant spread {spread:.3e} exceeds {tol:.1e}")
        self.spread = spread
        self.tol = tol


class MismatchedConstantsError(QeCheckError):
    pass


# --- cohomogeneity-one ------------------------------------------------------

class UnsupportedAnsatzError(QeCheckError):
    pass


class StepTooLargeError(QeCheckError):
    def __init__(self, drift, tol):
        super().__init__(f"half-step drift {drift:.3e} exceeds {tol:.1e}; reduce h")
        self.drift = drift
        self.tol = tol


class InsufficientNodesError(QeCheckError):
    pass


class SolutionStatusError(QeCheckError):
    """Lift requested on a trajectory that did not reach its endpoint."""


class InconsistentConstantsError(QeCheckError):
    """The lambda-mu-a relations admit no real solution."""


# --- configuration / CLI ----------------------------------------------------

class SchemaError(QeCheckError):
    def __init__(self, message, pointer=""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


class ExpressionError(SchemaError):
    """An expression string inside a config failed to parse. Carries the JSON
    pointer of the field plus line/column inside the expression source."""

    def __init__(self, message, pointer="", span=None, source=""):
        self.span = span
        self.source = source
        line, col = 1, (span[0] + 1 if span else 1)
        super().__init__(f"{message} (line {line}, column {col})", pointer)
        self.line = line
        self.column = col


class UnknownFixtureError(QeCheckError):
    def __init__(self, name, known):
        super().__init__(f"unknown fixture '{name}'; known: {', '.join(sorted(known))}")
        self.name = name
