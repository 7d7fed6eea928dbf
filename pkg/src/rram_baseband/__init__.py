"""In-memory baseband processing on simulated RRAM crossbars.

OFDM transforms, MIMO detection and channel estimation are carried out as
analog matrix operations on differential pairs of RRAM devices, with the
energy and latency of every write and read tallied alongside.
"""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
