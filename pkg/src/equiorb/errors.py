"""Exception types raised across the package."""


class EquiOrbError(Exception):
    """Base class for all package errors."""


class ClosureOverflow(EquiOrbError):
    """A generated group exceeded the element cap."""


class ValidationError(EquiOrbError):
    """A problem definition violates one or more structural invariants.

    ``failures`` lists every violated invariant as a human readable string.
    """

    def __init__(self, failures):
        if isinstance(failures, str):
            failures = [failures]
        self.failures = list(failures)
        super().__init__("; ".join(self.failures))


class ParseError(EquiOrbError):
    """A problem or result file could not be parsed."""


class SchemaError(ParseError):
    """A result file does not match the expected schema."""


class AliasError(EquiOrbError):
    """The time grid is too coarse for the Fourier basis."""


class CollisionError(EquiOrbError):
    """Two bodies came closer than the collision tolerance."""

    def __init__(self, h, i, j, distance):
        self.h = h
        self.i = i
        self.j = j
        self.distance = distance
        super().__init__(
            f"collision between bodies {i + 1} and {j + 1} at sample {h} "
            f"(distance {distance:.3e})"
        )


class UnsupportedDimension(EquiOrbError):
    """Rendering was requested for a space dimension other than 2 or 3."""
