"""CRS-FL: conditional-random-sampling federated learning simulator.

Thin re-export of the compiled extension; see the C++ headers for the
authoritative API documentation.
"""

from ._crsfl import *  # noqa: F401,F403
from ._crsfl import __doc__  # noqa: F401
