"""SGD driven by gradient samples from a finite-state Markov chain."""

from ._core import *  # noqa: F401,F403
from ._core import MarkovSgdError

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
