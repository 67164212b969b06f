"""Exception hierarchy.

Every failure the toolkit can signal derives from :class:`LoopSpaceError`,
so callers that only care about "something geometric went wrong" can catch
one class.
"""


class LoopSpaceError(Exception):
    pass


# manifold
class OutsideTubularNeighbourhood(LoopSpaceError):
    pass


class NotOnManifold(LoopSpaceError):
    pass


class TangencyViolation(LoopSpaceError):
    pass


class PairOutsideV(LoopSpaceError):
    pass


class NewtonDivergence(LoopSpaceError):
    pass


class FiberMismatch(LoopSpaceError):
    pass


# loops
class DerivativeUnavailable(LoopSpaceError):
    pass


class InsufficientResolution(LoopSpaceError):
    pass


class CoverIncomplete(LoopSpaceError):
    pass


class OverlapMismatch(LoopSpaceError):
    pass


class DomainViolation(LoopSpaceError):
    pass


class DimensionMismatch(LoopSpaceError):
    pass


# smoothing
class NoAdmissibleConstants(LoopSpaceError):
    pass


class NoCompactness(NoAdmissibleConstants):
    pass


class ResolutionTooCoarse(LoopSpaceError):
    pass


class NotBased(LoopSpaceError):
    pass


# atlas
class GridMismatch(LoopSpaceError):
    pass


class OutsideW12(LoopSpaceError):
    pass


class DomainExit(LoopSpaceError):
    pass


class HolonomyCorrectionFailure(LoopSpaceError):
    pass


class FrameMismatch(LoopSpaceError):
    pass


class PartitionDefect(LoopSpaceError):
    pass


class OdeStepRejected(LoopSpaceError):
    pass


class BasepointOutsideU(LoopSpaceError):
    pass


class NonSmoothCenter(LoopSpaceError):
    pass


# actions
class MonotonicityViolation(LoopSpaceError):
    pass


class ZeroProbe(LoopSpaceError):
    pass


class EmptyCorpus(LoopSpaceError):
    pass


# cli
class ConfigError(LoopSpaceError):
    pass


class CheckFailure(LoopSpaceError):
    pass
