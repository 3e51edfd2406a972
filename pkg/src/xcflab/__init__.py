"""Numerical laboratory for the cross curvature flow and its normalized variants."""

from .errors import (CurvatureSignError, DomainError, RegimeError, StiffnessError,
                     UnderflowError, XcfError)
from .homogeneous import FlowSpec, GuardStatus, event_guard, flow_rhs, hyperbolic_model
from .flow import RescaleMap, Trajectory, fit_decay_rate, integrate, rescale_xcf

__version__ = "0.1.0"

__all__ = [
    "CurvatureSignError", "DomainError", "RegimeError", "StiffnessError", "UnderflowError",
    "XcfError", "FlowSpec", "GuardStatus", "event_guard", "flow_rhs", "hyperbolic_model",
    "RescaleMap", "Trajectory", "fit_decay_rate", "integrate", "rescale_xcf",
]
