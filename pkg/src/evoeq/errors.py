"""Exception hierarchy.

Every numerical failure carries a ``certificate`` (the internal check that
failed) and an ``inequality`` label naming the operator inequality that
check encodes, so reports and CLI messages can cite both.
"""


class EvoEqError(Exception):
    certificate = "generic"
    inequality = ""

    def __init__(self, message, *, certificate=None, inequality=None, **details):
        super().__init__(message)
        if certificate is not None:
            self.certificate = certificate
        if inequality is not None:
            self.inequality = inequality
        self.details = details

    def to_dict(self):
        return {
            "error": type(self).__name__,
            "message": str(self),
            "certificate": self.certificate,
            "inequality": self.inequality,
            "details": {k: _plain(v) for k, v in self.details.items()},
        }


def _plain(value):
    if isinstance(value, complex):
        return [value.real, value.imag]
    if hasattr(value, "item"):
        return _plain(value.item())
    return value


class ShapeError(EvoEqError, ValueError):
    certificate = "shape"


class AccretivityError(EvoEqError):
    """Real part not bounded below by the requested constant."""

    certificate = "accretivity"
    inequality = "Re T >= c"

    def __init__(self, message, *, lower_bound=None, **kw):
        super().__init__(message, lower_bound=lower_bound, **kw)
        self.lower_bound = lower_bound


class SingularBlockError(EvoEqError):
    certificate = "invertibility"
    inequality = "rcond(T) > threshold"

    def __init__(self, message, *, rcond=None, **kw):
        super().__init__(message, rcond=rcond, **kw)
        self.rcond = rcond


class MembershipError(EvoEqError):
    """Operator outside M(H0, H1) or outside a requested M(alpha)."""

    certificate = "membership"

    def __init__(self, message, *, condition=None, **kw):
        super().__init__(message, condition=condition, **kw)
        self.condition = condition


class StructureError(EvoEqError):
    certificate = "structure"


class InternalConsistencyError(EvoEqError, AssertionError):
    certificate = "internal"


class DomainError(EvoEqError, ValueError):
    certificate = "domain"
    inequality = "Re z > nu0"


class AliasingError(EvoEqError):
    certificate = "band_limit"
    inequality = "top-octave energy < 1e-6 total"


class WellPosednessError(EvoEqError):
    certificate = "picard_coercivity"
    inequality = "Re zM(z) >= c > 0"


class SolverError(EvoEqError):
    certificate = "frequency_solve"


class HypothesisError(EvoEqError):
    """A convergence experiment input violates the uniform bounds."""

    certificate = "uniform_bounds"


class CoefficientError(EvoEqError):
    certificate = "coefficient_bounds"
    inequality = "Re a(x) >= alpha, Re a(x)^-1 >= 1/beta"


class AssemblyError(EvoEqError):
    certificate = "skew_assembly"
    inequality = "A* = -A"


class ResolutionError(EvoEqError, ValueError):
    certificate = "resolution"


class ConditionError(EvoEqError):
    """A model parameter set fails one of its stated inequalities."""

    certificate = "model_condition"
