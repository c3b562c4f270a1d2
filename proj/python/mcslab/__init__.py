"""MCS selection laboratory for uplink MU-MIMO-OFDM.

Thin python surface over the C++ core: EP detection, psi tables, LDPC
coding, EXIT curves, the vector-database MI predictor and the simulation
harness.
"""

from mcslab._core import *  # noqa: F401,F403
from mcslab._core import __doc__ as _core_doc  # noqa: F401

__version__ = "0.1.0"
