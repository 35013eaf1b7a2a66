"""Python bindings for the memscope memory hierarchy toolkit."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
