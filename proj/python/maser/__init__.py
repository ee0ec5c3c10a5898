from ._maser import *  # noqa: F401,F403
from ._maser import __version__  # noqa: F401
