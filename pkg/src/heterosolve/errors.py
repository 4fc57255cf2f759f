"""Exception types shared across the package."""


class HeteroSolveError(Exception):
    """Base class for all package-specific errors."""


# --- linear algebra kernels ---------------------------------------------


class RankDeficient(HeteroSolveError):
    """A matrix that must have full (row or column) rank does not."""


class NotSymmetric(HeteroSolveError):
    """A symmetric eigensolve was requested on a non-symmetric matrix."""


class Singular(HeteroSolveError):
    """Condition number requested for a numerically singular matrix."""


# --- system construction -------------------------------------------------


class SingularDraw(HeteroSolveError):
    """A randomly generated coefficient matrix failed the invertibility
    tolerance.  Callers may redraw."""


class NotDivisible(HeteroSolveError):
    """Even partition requested with a machine count that does not divide n."""


class BadSizes(HeteroSolveError):
    """Custom partition sizes are not positive or do not sum to n."""


class RankDeficientBlock(RankDeficient):
    """A machine's equation block has linearly dependent rows."""

    def __init__(self, index: int, message: str = ""):
        self.index = index
        super().__init__(message or f"machine {index}: row block is rank deficient")


# --- heterogeneity metrics -----------------------------------------------


class DimensionMismatch(HeteroSolveError):
    """Subspace bases do not live in the same ambient space."""


class TooFewMachines(HeteroSolveError):
    """Cross-machine heterogeneity needs at least two machines."""


class ZeroRow(HeteroSolveError):
    """A coefficient row has (numerically) zero norm, so angles with it
    are undefined."""


# --- rates and bounds -----------------------------------------------------


class BadKappa(HeteroSolveError):
    """Condition number argument below 1."""


class BadLambda(HeteroSolveError):
    """Eigenvalue argument outside its admissible range."""


class DegenerateAngle(HeteroSolveError):
    """An angle of zero makes the requested bound infinite."""


class UndefinedPhi(HeteroSolveError):
    """Minimum local heterogeneity is undefined (every machine holds a
    single equation)."""


# --- solver drivers --------------------------------------------------------


class InvalidConfig(HeteroSolveError):
    """Solver configuration violates a parameter constraint."""


class BadSpectrum(HeteroSolveError):
    """Tuning requested on a spectrum with a non-positive smallest
    eigenvalue."""


class NoConvergentParams(HeteroSolveError):
    """Hyperparameter search could not find a contraction (radius < 1)."""


class SolverRunError(HeteroSolveError):
    """Base for run failures; carries the partial trace when available."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace


class Diverged(SolverRunError):
    """Relative error exceeded the divergence threshold."""


class Stalled(SolverRunError):
    """Iteration budget exhausted before reaching tolerance."""


# --- experiments -----------------------------------------------------------


class ExcessiveRejection(HeteroSolveError):
    """The condition-number rejection rule discarded too many draws."""


class ParseError(HeteroSolveError):
    """A matrix/vector/config file could not be parsed."""
