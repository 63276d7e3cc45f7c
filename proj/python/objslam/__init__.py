from ._objslam import *  # noqa: F401,F403
from ._objslam import __doc__  # noqa: F401
