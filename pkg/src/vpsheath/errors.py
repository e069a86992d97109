"""Exception types raised by the solvers."""


class VpSheathError(Exception):
    """Base class for all package errors."""


class DegenerateProfile(VpSheathError, ValueError):
    pass


class SingularIntegrand(VpSheathError, ValueError):
    pass


class NonRealReconstruction(VpSheathError, ValueError):
    pass


class CflViolation(VpSheathError, ValueError):
    pass


class BvpError(VpSheathError, RuntimeError):
    """Failure inside the boundary value solver."""


class NewtonDiverged(BvpError):
    pass


class MeshLimitExceeded(BvpError):
    pass


class SingularJacobian(BvpError):
    pass


class VacuumEncountered(VpSheathError, RuntimeError):
    """Density dropped to (or below) the vacuum floor.

    Attributes:
        node: index of the first offending grid node, if known.
        time: simulation time at which it happened, if known.
    """

    def __init__(self, message, node=None, time=None):
        super().__init__(message)
        self.node = node
        self.time = time


class BohmViolated(VpSheathError, ValueError):
    pass


class NonpositiveWallGap(VpSheathError, ValueError):
    pass


class DomainTooShort(VpSheathError, RuntimeError):
    pass


class FitWindowEmpty(VpSheathError, ValueError):
    pass


class WallTraceMismatch(VpSheathError, ValueError):
    pass


class GridMismatch(VpSheathError, ValueError):
    pass


class InvariantViolation(VpSheathError, RuntimeError):
    """A computed result breaks a property it is required to satisfy."""
