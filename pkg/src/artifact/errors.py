"""Exception types shared by every module."""


class ArtifactError(Exception):
    pass


class AuxiliarySumNonzero(ArtifactError):
    pass


class BudgetExceeded(ArtifactError):
    pass


class NotEven(ArtifactError):
    pass


class BadSplit(ArtifactError):
    pass


class DivergentBound(ArtifactError):
    pass


class QuadratureFailure(ArtifactError):
    pass


class OutOfTable(ArtifactError):
    pass


class HypothesisViolated(ArtifactError):
    pass


class DegenerateFrequencies(ArtifactError):
    pass


class KappaTooLarge(ArtifactError):
    pass


class InsufficientSamples(ArtifactError):
    pass


class GridTooCoarse(ArtifactError):
    pass


class CFLViolation(ArtifactError):
    pass


class ConfigInvalid(ArtifactError):
    pass
