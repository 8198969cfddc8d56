"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command line front end:
2 for bad input or configuration, 3 for numerical solver failures,
4 for failed verification and 5 for a field geometry that the requested
construction cannot handle.
"""


class GaudinError(Exception):
    exit_code = 3

    @property
    def code(self) -> str:
        return type(self).__name__


class ConfigError(GaudinError, ValueError):
    exit_code = 2


class EmptySystem(ConfigError):
    pass


class DuplicateEpsilon(ConfigError):
    pass


class SiteOutOfRange(ConfigError, IndexError):
    pass


class BadUpSet(ConfigError):
    pass


class DimensionMismatch(ConfigError):
    pass


class WrongFrame(ConfigError):
    pass


class NonHermitianObservable(ConfigError):
    pass


class FieldGeometryError(GaudinError, ValueError):
    exit_code = 5


class ZeroInPlaneField(FieldGeometryError):
    """The common-frame ansatz needs a nonzero transverse field."""


class ZeroField(FieldGeometryError):
    pass


class SolverError(GaudinError, ArithmeticError):
    exit_code = 3


class SpectralCollision(SolverError):
    """A spectral parameter sits on top of an inhomogeneity."""


class CoincidentRoots(SolverError):
    pass


class NoConvergence(SolverError):
    pass


class SingularJacobian(SolverError):
    pass


class ContinuationStall(SolverError):
    pass


class DuplicateSolution(SolverError):
    pass


class SingularConversion(SolverError):
    pass


class RoundTripFailure(SolverError):
    pass


class IncompleteBasis(SolverError):
    pass


class VerificationFailure(GaudinError):
    exit_code = 4


class DegenerateSpectrum(UserWarning):
    pass
