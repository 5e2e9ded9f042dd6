"""Gas price oracles for next-block inclusion.

Wei amounts are plain Python ints. Percent levels (alpha) are given as
percentages, e.g. 75 for the 75th percentile.
"""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401

__version__ = "0.1.0"
