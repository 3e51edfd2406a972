"""Exception hierarchy shared by every xcflab module."""


class XcfError(Exception):
    """Base class for all library errors."""


class DomainError(XcfError, ValueError):
    """Input outside an operation's domain (non-SPD metric, bad grid, ...)."""


class CurvatureSignError(DomainError):
    """A cross-curvature flow was evaluated at a metric without negative sectional curvature."""


class RegimeError(DomainError):
    """det P <= 0: the state has left the negative-curvature regime."""


class UnderflowError(DomainError):
    """A decay signal dropped below the representable floor inside a fit window."""


class StiffnessError(XcfError, RuntimeError):
    """The adaptive integrator could not take a step larger than its floor."""
