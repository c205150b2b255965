"""Locality constants of quantum spin systems, checked against exact small-system dynamics."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import BoundViolated, LocboundError
from .interaction import Interaction, SpinModel, SpinModelSpec, heisenberg_preset, spin_component
from .metric_space import DecayProfile, Geometry, SiteSpace, convolution_constant, pair_sum_norm
from .quantum import ObservableWithSupport, SpectralData, spectral_decompose

__all__ = [
    "BoundViolated",
    "DecayProfile",
    "Geometry",
    "Interaction",
    "LocboundError",
    "ObservableWithSupport",
    "SiteSpace",
    "SpectralData",
    "SpinModel",
    "SpinModelSpec",
    "convolution_constant",
    "heisenberg_preset",
    "pair_sum_norm",
    "spectral_decompose",
    "spin_component",
]
