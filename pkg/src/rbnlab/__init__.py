"""Numerical laboratory for regularisation by noise of a singular stochastic heat equation.

Modules
-------
paths       exact fractional Brownian motion samples
occupation  local times, averaged fields and their regularity
sewing      dyadic sewing and Volterra sewing of germs
spectral    Fourier fields on the torus, heat semigroup, Schauder quotients
spde        mollified coefficients, exponential-Euler ensembles and their checks
harness     configuration, experiment runs and reports
"""
__version__ = "0.1.0"
