"""Abstract-index tensor monomials and polynomials."""

from ._backend import BACKEND
from .core import *  # noqa: F401,F403
from .core import __all__ as _core_all

__all__ = ["BACKEND"] + list(_core_all)
