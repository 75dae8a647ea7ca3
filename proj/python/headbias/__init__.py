"""Classification-head bias diagnostics for class-level unlearning.

Thin wrapper around the compiled ``headbias._core`` extension; everything
public lives there.
"""

from headbias._core import *  # noqa: F401,F403
from headbias._core import __version__  # noqa: F401
