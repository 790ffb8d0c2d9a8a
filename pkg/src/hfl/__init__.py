"""Capped short-rate model library: boundary classification, spectral
transition densities, bond and payoff pricing, and a Monte Carlo
cross-check engine, with a CSV-emitting command line."""

from .model import ModelParams
from .montecarlo import SimConfig
from .pricing import Curve, CurvePoint, Payoff

__all__ = ["ModelParams", "SimConfig", "Payoff", "Curve", "CurvePoint"]

__version__ = "0.1.0"
