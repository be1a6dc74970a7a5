"""Exception types raised across the package."""


class MatchPriorError(Exception):
    """Base class for all package errors."""


class GridMismatch(MatchPriorError):
    """Two measures or fields live on different parameter grids."""


class UnbalancedTransport(MatchPriorError):
    """Transport problem with unequal total masses."""


class DomainError(MatchPriorError):
    """A grid or support lies outside the admissible parameter domain."""


class InvalidDensity(MatchPriorError):
    """A density table or density field fails normalization checks."""


class EmptyExtensionBase(MatchPriorError):
    """Lipschitz extension requested from an empty base set."""


class UnboundedLogDensity(MatchPriorError):
    """The model has zero densities, so log q is unbounded on the grid."""


class PosteriorUndefined(MatchPriorError):
    """The marginal probability of the observation is zero."""


class ParameterViolation(MatchPriorError):
    """Region or schedule parameters violate a required inequality."""


class CredibilityDeficit(MatchPriorError):
    """An acceptance field has posterior credibility below the target level."""


class DegenerateUpdate(MatchPriorError):
    """The prior update map has a nonpositive normalizer."""
