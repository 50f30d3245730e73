"""Exact equilibria of a mean-field coagulation-fragmentation model, their
Airy-function limits and the perfect-simulation algorithms that realize them."""

from . import continuum, equilibrium, limitlaws, specfun, treesim
from .errors import ConfigError, DomainError, NumericError, PoleError, ResourceError

__version__ = "0.1.0"

__all__ = [
    "specfun",
    "equilibrium",
    "limitlaws",
    "treesim",
    "continuum",
    "DomainError",
    "NumericError",
    "PoleError",
    "ResourceError",
    "ConfigError",
]
