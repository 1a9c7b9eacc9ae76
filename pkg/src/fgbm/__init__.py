"""Fractional G-Brownian motion: simulation, pathwise calculus and verifiers.

Modules
-------
volterra   Volterra kernel, closed forms and discretized weight tables.
priors     Uncertainty sets, scenario policies and G-Brownian replicates.
gfbm       Fractional G-Brownian paths and their statistical verifiers.
fraccalc   Fractional integrals, Weyl derivatives and the pathwise integral.
youngsde   Pathwise SDE solver, Itô residuals and the arbitrage example.
gheat      Finite-difference G-heat equation and its Monte Carlo dual.
cli        Command-line experiment runner.
"""

__version__ = "0.1.0"
