"""Exception types raised by planereg."""


class PlaneRegError(Exception):
    """Base class for all planereg errors."""


class DegenerateInput(PlaneRegError, ValueError):
    """Input geometry does not define the requested quantity (collinear points, horizontal wall, ...)."""


class InvalidThreshold(PlaneRegError, ValueError):
    pass


class SingularSystem(PlaneRegError, ArithmeticError):
    """The quadric system is too ill-conditioned to give a 2D translation."""


class Underconstrained(PlaneRegError):
    """Plane evidence and prior together do not determine every degree of freedom.

    Attributes:
        missing: names of the unconstrained components, a subset of
            ``("rotation", "horizontal", "horizontal_complement", "vertical")``.
    """

    def __init__(self, missing):
        self.missing = tuple(missing)
        super().__init__("underconstrained motion, missing: " + ", ".join(self.missing))


class NoMotion(PlaneRegError):
    """Matching produced nothing usable; ``reason`` is one of
    ``"no planes"``, ``"no matches"`` or ``"insufficient constraints"``."""

    def __init__(self, reason, missing=()):
        self.reason = reason
        self.missing = tuple(missing)
        msg = reason if not self.missing else f"{reason} ({', '.join(self.missing)})"
        super().__init__(msg)


class EmptyCorrespondences(PlaneRegError, ValueError):
    pass


class ParseError(PlaneRegError, ValueError):
    """Malformed input file; ``offset`` is a line number (ASCII) or byte offset (binary)."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at {offset})"
        super().__init__(message)


class UnsupportedFormat(PlaneRegError, ValueError):
    pass


class NoHorizontalPlane(PlaneRegError):
    pass
