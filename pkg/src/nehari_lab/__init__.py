"""Numerical lab for positive ground states of competitive elliptic systems."""

__version__ = "0.1.0"

from .errors import NehariLabError  # noqa: E402,F401
