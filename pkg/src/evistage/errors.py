"""Exception hierarchy shared across the package."""


class EvistageError(Exception):
    """Base class for all errors raised by this package."""


class EvidenceError(EvistageError):
    """Evidence vector is negative, non-finite, or malformed."""


class DegenerateOpinionError(EvistageError):
    """Opinion with zero uncertainty mass cannot be inverted."""


class DimensionError(EvistageError):
    """Operands disagree on class count or vector length."""


class TotalConflictError(EvistageError):
    """Pairwise conflict is (numerically) total; fusion is undefined."""


class EmptyInputError(EvistageError):
    """An operation requiring at least one element received none."""


class DomainError(EvistageError):
    """Argument outside the mathematical domain of a function."""


class DivergenceError(EvistageError):
    """Training produced a non-finite loss."""


class AlignmentError(EvistageError):
    """Sample ids disagree between view files and the label file."""


class ParseError(EvistageError):
    """A CSV cell failed to parse as a finite number."""


class StratificationError(EvistageError):
    """A class would be absent from one of the requested splits."""


class ConfigurationError(EvistageError):
    """Run configuration is inconsistent or incomplete."""


class LabelError(EvistageError):
    """Class labels outside the expected range."""


class UndefinedAUCError(EvistageError):
    """ROC AUC requested but only one class is present."""
