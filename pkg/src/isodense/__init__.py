"""Numerical toolkit for isoperimetric problems in R^n with density."""

__version__ = "0.1.0"

from . import density, measure, regions  # noqa: F401
