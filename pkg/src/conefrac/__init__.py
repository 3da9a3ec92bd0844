"""Kober-type fractional integrals of positive definite matrix argument."""

__version__ = "0.1.0"
