"""Error taxonomy shared by every module.

Each class carries the process exit code the command-line front end uses
when the error escapes a subcommand.
"""


class BilliardError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 10


class InvalidInput(BilliardError, ValueError):
    """Malformed arguments: bad domain spec, gcd(p, q) != 1, bad grid size."""

    exit_code = 2


class GrazingState(InvalidInput):
    """State too close to the boundary tangent for the step to be well posed."""

    exit_code = 2


class LoopSweepFailure(BilliardError):
    """The 4-loop continuation over the psi grid failed at some node."""

    exit_code = 3

    def __init__(self, message, node=None, cause=None):
        super().__init__(message)
        self.node = node
        self.cause = cause


class ConvergenceFailure(BilliardError):
    exit_code = 4


class OutOfRange(BilliardError):
    """No next bounce solves the momentum equation inside the allowed bracket."""

    exit_code = 5


class NotConvex(BilliardError):
    """h + h'' <= 0 somewhere (or h <= 0: origin outside the domain)."""

    exit_code = 6


class TailNotResolved(BilliardError):
    exit_code = 7


class CoincidentPoints(BilliardError):
    exit_code = 8


class NoBracket(BilliardError):
    """No sign change of the loop-closing function along the scanned fiber."""

    exit_code = 11


class MultipleSolutions(BilliardError):
    """Two or more sign changes along the fiber: loop uniqueness fails."""

    exit_code = 12


class DegenerateFamily(BilliardError):
    """M_{p,q} is constant: a whole curve of periodic orbits.

    ``pair`` holds two (non-isolated) members of the family.
    """

    exit_code = 13

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class ParallelChords(BilliardError):
    exit_code = 14


class NotAnEllipseBranch(BilliardError):
    exit_code = 15


class FocalSegmentCrossing(BilliardError):
    exit_code = 16


class OnFocalSegment(BilliardError):
    exit_code = 17


class NotAGraph(BilliardError):
    exit_code = 18


class BandEmpty(BilliardError):
    exit_code = 19


class NotConverged(BilliardError):
    """Iteration stopped before its tolerance; ``result`` holds the flagged value."""

    exit_code = 20

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


ALL_ERRORS = (
    InvalidInput, GrazingState, LoopSweepFailure, ConvergenceFailure,
    OutOfRange, NotConvex, TailNotResolved, CoincidentPoints, NoBracket,
    MultipleSolutions, DegenerateFamily, ParallelChords, NotAnEllipseBranch,
    FocalSegmentCrossing, OnFocalSegment, NotAGraph, BandEmpty, NotConverged,
)
