from ._ccmia import *  # noqa: F401,F403
from ._ccmia import __version__  # noqa: F401
