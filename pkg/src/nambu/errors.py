"""Exception types shared across the package."""


class NambuError(Exception):
    """Base class for all package-specific errors."""


class ExprSyntaxError(NambuError):
    """Raised when expression or form text does not match the grammar.

    Carries the 0-based character position of the offending token.
    """

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnknownIdentifierError(NambuError):
    """An identifier is neither a declared variable nor a bound parameter."""


class ZeroDenominatorError(NambuError):
    """Division by an identically zero expression or polynomial."""


class PoleError(NambuError):
    """Evaluation at a point where a denominator vanishes."""


class DimensionMismatchError(NambuError):
    """Operands live over different variable contexts or dimensions."""


class DegreeError(NambuError):
    """A form has the wrong degree for the requested operation."""


class NonZeroDivergenceError(NambuError):
    """An operation requiring a divergence-free field got one that is not."""


class UnsupportedCoefficientsError(NambuError):
    """An operation restricted to polynomial coefficients got a true fraction."""


class SystemDefinitionError(NambuError):
    """A system definition is structurally invalid or fails its own checks."""
