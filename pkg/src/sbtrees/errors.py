"""Exception types raised by the samplers, metrics and experiments."""


class SbtreesError(ValueError):
    """Base class for every validation or domain error in the package."""

    code = "error"

    def to_record(self) -> dict:
        return {"error": self.code, "message": str(self)}


class SumMismatch(SbtreesError):
    code = "SumMismatch"


class NotSorted(SbtreesError):
    code = "NotSorted"


class Empty(SbtreesError):
    code = "Empty"


class NegativeEntry(SbtreesError):
    code = "NegativeEntry"


class InvalidParams(SbtreesError):
    code = "InvalidParams"


class InvalidTheta(InvalidParams):
    code = "InvalidTheta"


class SigmaZero(SbtreesError):
    code = "SigmaZero"


class NZero(SbtreesError):
    code = "NZero"


class OutOfRange(SbtreesError):
    code = "OutOfRange"


class DivergentIntegrand(SbtreesError):
    code = "DivergentIntegrand"


class InvalidHistory(SbtreesError):
    code = "InvalidHistory"


class InvalidTuple(SbtreesError):
    code = "InvalidTuple"


class NotPermutation(SbtreesError):
    code = "NotPermutation"


class NotBijection(SbtreesError):
    code = "NotBijection"


class IndexOutOfRange(SbtreesError):
    code = "IndexOutOfRange"


class NonPositiveScale(SbtreesError):
    code = "NonPositiveScale"


class TooLarge(SbtreesError):
    code = "TooLarge"


class NotIncreasing(SbtreesError):
    code = "NotIncreasing"


class GluePastCut(SbtreesError):
    code = "GluePastCut"


class LNonPositive(SbtreesError):
    code = "LNonPositive"


class NonIntegerPositions(SbtreesError):
    code = "NonIntegerPositions"


class ZeroMass(SbtreesError):
    code = "ZeroMass"


class NotProbability(SbtreesError):
    code = "NotProbability"


class UnknownVertex(SbtreesError):
    code = "UnknownVertex"


class DisconnectedStage(SbtreesError):
    code = "DisconnectedStage"


class MismatchedRegime(SbtreesError):
    code = "MismatchedRegime"


class InvalidConfig(SbtreesError):
    code = "InvalidConfig"
