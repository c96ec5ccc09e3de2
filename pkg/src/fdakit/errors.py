"""Exception hierarchy shared across the toolkit."""


class FdakitError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(FdakitError, ValueError):
    """A numeric parameter is outside its documented range."""


class DimensionError(FdakitError, ValueError):
    """Grid or image dimensions are invalid or inconsistent."""


class LabelParseError(FdakitError, ValueError):
    """A label/prediction file line could not be parsed."""

    def __init__(self, message, line_number=None):
        super().__init__(message)
        self.line_number = line_number


class TaxonomyError(FdakitError, KeyError):
    """A raw class name is not registered, or a class id is out of range."""


class ManifestError(FdakitError, ValueError):
    """A dataset manifest violates its invariants."""


class SplitError(FdakitError, ValueError):
    """The manifest cannot be split with the requested ratios."""


class RebalanceError(FdakitError, ValueError):
    """Class rebalancing is impossible (e.g. no yellow images present)."""


class PseudoLabelError(FdakitError, ValueError):
    """The SSL compilation found missing or inconsistent pseudo-label files."""

    def __init__(self, message, missing=()):
        super().__init__(message)
        self.missing = list(missing)


class InputError(FdakitError, ValueError):
    """Evaluation input violates the data contract (e.g. unknown class id)."""
