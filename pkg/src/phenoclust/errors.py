"""Exception hierarchy.

Every data error raised by the package derives from :class:`PhenoclustError`.
The CLI reports the class name, so names are part of the public surface.
"""


class PhenoclustError(Exception):
    """Base class for all package errors."""

    #: CLI exit status when this error escapes a subcommand.
    exit_status = 2


# ingest
class MissingColumn(PhenoclustError):
    pass


class EmptyDataset(PhenoclustError):
    pass


class InvalidMeal(PhenoclustError):
    pass


# clustering
class FewerThanTwoPoints(PhenoclustError):
    pass


class KOutOfRange(PhenoclustError):
    exit_status = 1


class UndefinedForK(PhenoclustError):
    pass


class TooFewMeals(PhenoclustError):
    pass


class NoSurvivingClusters(PhenoclustError):
    pass


# gold standard DSL
class DslError(PhenoclustError):
    pass


class DslSyntaxError(DslError):
    def __init__(self, message: str, position: int, expected=()):
        self.position = position
        self.expected = tuple(expected)
        detail = f"{message} at position {position}"
        if self.expected:
            detail += f" (expected {', '.join(self.expected)})"
        super().__init__(detail)


class UnknownVariable(DslError):
    pass


class MixedOrGroup(DslError):
    pass


class InvalidRange(DslError):
    pass


class InvalidQuantile(DslError):
    pass


class DuplicateObservationId(DslError):
    pass


class UnresolvedThreshold(DslError):
    pass


# evaluation
class MismatchedElements(PhenoclustError):
    pass


# synth
class InvalidSpec(PhenoclustError):
    pass


# viz
class TooFewFeatures(PhenoclustError):
    pass
