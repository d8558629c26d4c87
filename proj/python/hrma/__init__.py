"""Geodesic rays of toric Cauchy data.

Grids are ``GridFn`` objects whose ``values`` are numpy arrays shaped by their axes.
Library errors surface as ``DomainError`` (a ``ValueError``) and ``NumericalError``
(an ``ArithmeticError``).
"""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
