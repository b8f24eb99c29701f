"""Probabilistic O-D demand estimation from day-to-day link counts."""

from ._core import *  # noqa: F401,F403
from ._core import Error, InputError, NumericalError

__all__ = [name for name in dir() if not name.startswith("_")]
