"""Exception types shared across the package.

Everything raised on purpose derives from TriweightError so callers can
catch the whole family with one clause. Solver-level failures carry the
iteration index when they happen mid-run.
"""

from __future__ import annotations


class TriweightError(Exception):
    """Base class for all package errors."""


class UnknownId(TriweightError, KeyError):
    """An operation referenced a variable, factor, or edge that does not exist."""


class KindMismatch(TriweightError):
    """Reparameterize was given a params block that fails the factor kind's schema."""


class NotYetConcurred(TriweightError):
    """Snapshot requested before any variable values exist."""


class InfeasibleCertainty(TriweightError):
    """Conflicting certain (infinite-weight) inputs make a hard constraint unsatisfiable."""

    def __init__(self, message: str, factor_id: int | None = None, iteration: int | None = None):
        super().__init__(message)
        self.factor_id = factor_id
        self.iteration = iteration


class CertaintyConflict(TriweightError):
    """Two certain opinions about one variable disagree beyond tolerance."""

    def __init__(self, message: str, variable_id: int | None = None, iteration: int | None = None):
        super().__init__(message)
        self.variable_id = variable_id
        self.iteration = iteration


class PuzzleSyntaxError(TriweightError, ValueError):
    """Puzzle text could not be tokenized into a grid."""


class InvalidPuzzle(TriweightError, ValueError):
    """Parsed puzzle violates the rules (clue conflict, bad size)."""


class Unsolved(TriweightError):
    """Solver hit its iteration budget without reaching a valid solution."""

    def __init__(self, message: str, iterations: int | None = None):
        super().__init__(message)
        self.iterations = iterations


class Inconsistent(TriweightError):
    """Certainty propagation derived a contradiction: the puzzle has no solution."""


class NoSolution(TriweightError):
    """Exhaustive search proved no assignment satisfies the constraints."""


class MultipleSolutions(TriweightError):
    """Exhaustive search found more than one satisfying assignment."""


class InfeasibleRadius(TriweightError, ValueError):
    """Requested circle count and radius exceed the packable area bound."""


class UnknownCircle(TriweightError, KeyError):
    """Steering command referenced a circle id not present in the instance."""


class PortInUse(TriweightError, OSError):
    """Service could not bind its listening port."""


class DecodeError(TriweightError, ValueError):
    """A wire frame could not be decoded."""

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset
