"""Exception types shared across the package.

All of them subclass ``ValueError`` so callers that only care about "bad
input" can catch the builtin.
"""


class DomainError(ValueError):
    """An argument lies outside the domain a function is defined on."""


class DegenerateError(ValueError):
    """A construction has no unique solution (zero degree, zero margin...)."""


class LabelCoverageError(ValueError):
    """A classifier was asked to learn from a single class."""


class ShapeError(ValueError):
    """Array shapes do not agree with a network or dataset layout."""


class StructureError(ValueError):
    """A network is too shallow for the requested transform."""


class FormatError(ValueError):
    """A file does not follow its declared on-disk format.

    ``field`` names the header field or section that failed validation.
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class LearnerError(RuntimeError):
    """A learner failed on one of the labelings induced by a hypothesis."""

    def __init__(self, message: str, index: int):
        super().__init__(message)
        self.index = index


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""
