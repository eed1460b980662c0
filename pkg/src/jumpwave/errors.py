"""Exception types shared across the solver modules."""


class JumpwaveError(Exception):
    """Base class for all library errors."""


class ValidationError(JumpwaveError):
    """Malformed input data or configuration."""


# --- spectral ---------------------------------------------------------------

class ComplexEigenvalues(JumpwaveError):
    """Coefficient matrix has a complex eigenvalue pair (not hyperbolic here)."""


class RepeatedEigenvalues(JumpwaveError):
    """Eigenvalues are not pairwise distinct (not strictly hyperbolic)."""


class IllConditionedEigenvectors(JumpwaveError):
    """Eigenvector matrix too ill-conditioned for a meaningful inverse."""


class EvaluationOnInterfaceWithoutSide(JumpwaveError):
    """A field was queried exactly on an interface with no side selected."""


# --- characteristic tracing -------------------------------------------------

class CharacteristicTrappedAtInterface(JumpwaveError):
    """One-sided speeds make the backward characteristic non-continuable."""


class IntegratorFailure(JumpwaveError):
    """Adaptive ODE integration could not meet its tolerances."""


class NoSuchCrossing(JumpwaveError):
    """The characteristic from this origin never meets the given interface."""


# --- piecewise / exact solvers ----------------------------------------------

class ZeroSpeed(JumpwaveError):
    """A characteristic speed is (numerically) zero; 1D solvers require
    speeds bounded away from zero."""


class MixedSignFamily(JumpwaveError):
    """A characteristic family changes sign between regions; out of scope
    for the point-value solvers (would produce measure-valued solutions)."""


class MissingTraces(JumpwaveError):
    """Solution field does not carry the one-sided interface traces."""


# --- variable-coefficient solver ----------------------------------------------

class QuadratureFailure(JumpwaveError):
    """Quadrature along a characteristic produced a non-finite value."""


class DifferentiationAcrossInterface(JumpwaveError):
    """A finite-difference stencil would straddle an interface."""


class NonContraction(JumpwaveError):
    """Time windows cannot be refined enough for a contractive sweep."""


class NoConvergence(JumpwaveError):
    """Fixed-point sweeps did not converge within the iteration budget."""


# --- energy module ------------------------------------------------------------

class GridMismatch(JumpwaveError):
    """Field shape does not match the grid it is claimed to live on."""


class InterfaceNotOnGridFace(JumpwaveError):
    """The interface plane does not coincide with a cell face."""


class CFLViolation(JumpwaveError):
    """Requested time step violates the stability limit."""


class AssumptionViolation(JumpwaveError):
    """A structural assumption (positivity, symmetry, boundedness) fails."""

    def __init__(self, assumption: str, detail: str = ""):
        self.assumption = assumption
        super().__init__(f"{assumption}: {detail}" if detail else assumption)


# --- cli ------------------------------------------------------------------------

class IncompatibleMode(JumpwaveError):
    """Comparison mode is not applicable to the configured problem."""
