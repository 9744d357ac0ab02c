"""Simulation and numerical verification toolkit for censored symmetric
pure-jump Levy processes.

The package builds the censored process on a domain two ways (jump
suppression and Feynman-Kac reweighting of the killed process), estimates
Green functions, Poisson kernels and conditional gauges by Monte Carlo,
and checks quantitative potential-theory inequalities (3G, Carleson,
Harnack, Khasminskii gauge bound) against closed-form oracles where
available.
"""

__version__ = "0.1.0"

__all__ = ["__version__", "backend_info"]


def backend_info() -> dict:
    """Report which path-simulation backend is active."""
    from . import engine

    return {
        "backend": engine.BACKEND,
        "compiled": engine.BACKEND == "compiled",
    }
