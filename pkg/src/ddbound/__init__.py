"""Decoupling error of pi-pulse sequences under timing constraints.

Spectral measures, pulse sequences, filter functions, the decoupling error
with its analytic bounds, and constrained sequence optimisation (BADD, LODD,
OFDD). Frequencies are in rad/ps and times in ps.
"""
from .error import chi, chi_gradient, purity_loss
from .optimize import badd, lodd, ofdd
from .sequences import PulseSequence, make_udd
from .spectra import exciton_measure

__version__ = "0.1.0"

__all__ = ["PulseSequence", "make_udd", "exciton_measure", "chi", "chi_gradient",
           "purity_loss", "badd", "lodd", "ofdd", "__version__"]
