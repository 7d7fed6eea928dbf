"""Backend selection for the hot loops.

The compiled extension is used when it imports; setting
``RRAM_BASEBAND_PURE_PYTHON=1`` forces the numpy fallback.  ``BACKEND`` names
the active one.
"""

import os

from . import _fallback

_compiled = None
if not os.environ.get("RRAM_BASEBAND_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

_impl = _compiled if _compiled is not None else _fallback
BACKEND = "compiled" if _compiled is not None else "python"


def backends():
    """Available kernel implementations keyed by name."""
    out = {"python": _fallback}
    if _compiled is not None:
        out["compiled"] = _compiled
    return out


def program_verify(*args):
    return _impl.program_verify(*args)


def program_open_loop(*args):
    return _impl.program_open_loop(*args)


def relax(*args):
    return _impl.relax(*args)
