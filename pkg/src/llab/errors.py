"""Exception classes.

Three families map onto the CLI exit codes: configuration and misuse
errors (2), numerical tolerance failures (3) and cache errors (4).
"""


class LlabError(Exception):
    exit_code = 2


class ConfigInvalid(LlabError):
    pass


class UnknownBuiltin(ConfigInvalid):
    pass


class InvalidParameter(ConfigInvalid):
    pass


# -- misuse of an operation (bad inputs rather than bad numerics) ---------

class ZeroCovector(LlabError, ValueError):
    pass


class NotATorus(LlabError, ValueError):
    pass


class SingularTorus(LlabError, ValueError):
    pass


class NearCriticalAmbiguity(LlabError, ValueError):
    pass


class NoRootInFamily(LlabError, ValueError):
    pass


class BSConditionViolated(LlabError, ValueError):
    pass


class LevelMismatch(LlabError, ValueError):
    pass


class WindowTooWide(LlabError, ValueError):
    pass


class EmptySeries(LlabError, ValueError):
    pass


class NonzeroAverage(LlabError, ValueError):
    pass


class InconsistentSystem(LlabError, ValueError):
    pass


class ObstructionAtOrder(InconsistentSystem):
    def __init__(self, order, message=""):
        self.order = order
        super().__init__(message or f"cross-consistency fails at order {order}")


class CutoffOverflow(LlabError, ValueError):
    pass


class FiniteComplexityViolated(LlabError, ValueError):
    pass


# -- numerical tolerance failures -----------------------------------------

class NumericalToleranceError(LlabError):
    exit_code = 3


class DegenerateCritical(NumericalToleranceError):
    pass


class TurningPointNotBracketed(NumericalToleranceError):
    pass


class QuadratureNonconvergent(NumericalToleranceError):
    pass


class StepUnstable(NumericalToleranceError):
    pass


class GridTooCoarse(NumericalToleranceError):
    pass


class PoleRegularityViolated(NumericalToleranceError):
    pass


class CurveTrackingLost(NumericalToleranceError):
    pass


class ResolutionTooLow(NumericalToleranceError):
    pass


class AmbiguousCalibration(NumericalToleranceError):
    pass


class MatchingFailed(NumericalToleranceError):
    pass


class DegenerateFit(NumericalToleranceError):
    pass


# -- cache ----------------------------------------------------------------

class CacheError(LlabError):
    exit_code = 4


class CacheCorrupt(CacheError):
    pass


class UpstreamMissing(CacheError):
    pass
