"""Simulation and verification lab for the parabolic Anderson model on H^d.

The heat equation with a multiplicative stationary Gaussian potential of
compact correlation is studied on hyperbolic space through its Feynman-Kac
representation.  Subpackages provide exact hyperboloid-model geometry,
Gaussian field sampling with lazy conditional extension, hyperbolic Brownian
motion and bridges, heat kernel evaluation and calibration, the variational
formulas for the growth exponent, and the route/cluster machinery behind the
upper-bound bookkeeping, plus a CLI harness for reproducible experiments.
"""

__version__ = "0.1.0"
