"""Approximate pattern matching and hitting times in binary random fields."""

from ._apmatch import *  # noqa: F401,F403
from ._apmatch import __doc__  # noqa: F401

__version__ = "0.1.0"
