"""Exception types shared across the package."""


class RieszmotError(Exception):
    """Base class for all package-specific errors."""


class InfeasibleDensity(RieszmotError):
    """Density weights violate the marginal invariants (negative mass,
    wrong total, fewer than two positive atoms)."""


class ScaleGuard(RieszmotError):
    """Requested exact computation exceeds the configured size guard."""


class WrongGeometry(RieszmotError):
    """Operation applied to a density/potential with the wrong geometry."""


class NoConvergence(RieszmotError):
    """Iteration failed to reach its tolerance.

    Solvers normally report non-convergence through a flag on the result
    instead of raising; this class exists for callers that want to escalate.
    """


class NumericalUnderflow(RieszmotError):
    """Kernel entries vanished entirely; epsilon is too small for the cost
    scale even in log domain."""


class OutOfDomain(RieszmotError):
    """Point lies beyond the potential grid and no tail model is attached."""


class WindowTooSmall(RieszmotError):
    """Tail-fit window contains fewer than the required number of nodes."""


class BadDimension(RieszmotError):
    """Dimension outside the validity range of a Coulomb-case formula."""


class GridTooCoarse(RieszmotError):
    """Radial grid has too few nodes for finite-difference stencils."""


class ParseError(RieszmotError):
    """Malformed density CSV; carries the offending row number."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class MassMismatch(RieszmotError):
    """CSV weights do not sum to the requested particle count and
    renormalization was not requested."""
