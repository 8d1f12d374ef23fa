"""Exception types shared across the package."""


class RydsimError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(RydsimError):
    """Operator and vector (or two operators) have incompatible dimensions."""


class InglisTellerExceeded(RydsimError):
    """Static electric field at or above the Inglis-Teller limit."""


class BasisNotFull(RydsimError):
    """Operation requires the full n-manifold basis."""


class OrthonormalityLost(RydsimError):
    """Coupled-basis recursion lost orthonormality beyond tolerance."""


class CoincidentAtoms(RydsimError):
    """Two atoms share the same position."""


class NonPlanarGeometry(RydsimError):
    """Geometry has pairs with theta != pi/2 where a planar layout is required."""


class MismatchedWaist(RydsimError):
    """Interfering beams must share the same focal waist."""


class ResonanceCrossed(RydsimError):
    """Dressing detuning changes sign inside the manifold."""


class QuadratureNotConverged(RydsimError):
    """Doubling the quadrature nodes moved the result beyond tolerance."""


class CutoffTooSmall(RydsimError):
    """Momentum cutoff leaves non-negligible weight at the boundary."""


class GaplessTheory(RydsimError):
    """Free-theory formula evaluated at zero gap."""


class OutsideMassivePhase(RydsimError):
    """Soliton mass formula requested outside its domain."""


class NoConvergence(RydsimError):
    """Iterative eigensolver did not converge within the iteration budget."""


class ToleranceFailure(RydsimError):
    """Propagation could not meet the requested accuracy."""


class FitFailure(RydsimError):
    """Nonlinear least squares did not produce a usable fit."""


class EDBudgetExceeded(RydsimError):
    """Requested many-body dimension exceeds the configured budget."""


class SubspaceTooLarge(RydsimError):
    """Qudit subspace does not fit in the available occupation window."""


class ValidationError(RydsimError):
    """Experiment descriptor failed validation."""
