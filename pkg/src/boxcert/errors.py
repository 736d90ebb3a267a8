"""Exception types shared across the package."""


class BoxcertError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(BoxcertError):
    """An array or point has a shape incompatible with the object it feeds."""


class DomainEvalError(BoxcertError):
    """A function was evaluated (pointwise or over an interval) outside the
    region where it is defined, e.g. sqrt of a negative interval or division
    by an interval containing zero."""


class NonDifferentiableError(BoxcertError):
    """A derivative was requested at a point where it does not exist."""


class NotTwiceDifferentiableError(BoxcertError):
    """A curvature bound was requested over a region where the second
    derivative does not exist or is unbounded."""


class EnclosureUnavailableError(BoxcertError):
    """No sound linear enclosure could be constructed for the requested
    function over the requested box."""


class NoAdmissibleAxisError(BoxcertError):
    """No axis of a box is eligible for splitting (all candidate widths are
    at or below the refinement floor, or the candidate set is empty)."""


class WeightFormatError(BoxcertError):
    """A network weight document is malformed or violates an invariant."""


class ConfigError(BoxcertError):
    """A run configuration, system description, or CLI argument is invalid."""


class ParseError(ConfigError):
    """An expression string could not be parsed."""


class WorkerError(BoxcertError):
    """A verification worker raised an exception; carries the failing task."""
