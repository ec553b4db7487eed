"""Exception hierarchy shared across the package.

Three branches matter to callers: ``ParseError`` (bad input documents),
``PreconditionError`` (valid documents, invalid values) and
``PipelineError`` (a stage could not produce a result). The CLI maps each
branch to a distinct exit code.
"""


class ThermofootError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(ThermofootError):
    """An input file or document could not be parsed."""


class PreconditionError(ThermofootError):
    """An operation was called with inputs that violate its contract."""


class PipelineError(ThermofootError):
    """A pipeline stage failed to produce a usable result."""


# -- radiometry ---------------------------------------------------------------

class TooFewSamples(PreconditionError):
    pass


class DegenerateSamples(PreconditionError):
    pass


class EmptySamples(PreconditionError):
    pass


class DimensionMismatch(PreconditionError):
    pass


# -- segmentation -------------------------------------------------------------

class ConstantImage(PreconditionError):
    pass


class InvalidRect(PreconditionError):
    pass


class EmptyForeground(PipelineError):
    pass


class FeetNotSeparable(PipelineError):
    pass


# -- registration -------------------------------------------------------------

class CoincidentPoints(PreconditionError):
    pass


class CollinearPoints(PreconditionError):
    pass


class SingularTransform(PreconditionError):
    pass


# -- analysis -----------------------------------------------------------------

class EmptyOverlap(PipelineError):
    pass


class MaskTooSmall(PreconditionError):
    pass


class EmptyRoi(PipelineError):
    pass


# -- phantom ------------------------------------------------------------------

class LesionOutsideFoot(PreconditionError):
    pass


class InvalidAngle(PreconditionError):
    pass


# -- acquisition --------------------------------------------------------------

class SourceExhausted(PipelineError):
    pass
