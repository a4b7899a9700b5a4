"""Reaction-coordinate mapping and master-equation transport for fermionic baths."""

from .spectral import (
    Flat,
    Lorentzian,
    RCChainLevel,
    Semicircle,
    SpectralDensity,
    Tabulated,
    cauchy_plus,
    eval_sd,
    iterate_chain,
    rc_map,
)

__version__ = "0.1.0"
