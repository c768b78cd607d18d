"""Estimation of nonsmooth functionals of sparse normal means."""
__version__ = "0.1.0"
