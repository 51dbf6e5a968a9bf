"""Hot kernels with a compiled core and a numpy fallback.

The compiled extension ``_core`` is used when it imports; setting the
environment variable ``SGRBM_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _fallback

BACKENDS = {"python": _fallback}

try:
    from . import _core
except ImportError:  # extension not built
    _core = None
else:
    BACKENDS["compiled"] = _core

if _core is not None and os.environ.get("SGRBM_PURE_PYTHON") != "1":
    BACKEND = "compiled"
else:
    BACKEND = "python"

_impl = BACKENDS[BACKEND]

enum_log_sum = _impl.enum_log_sum
group_coefficients = _impl.group_coefficients
hoyer_rows = _impl.hoyer_rows
softplus = _fallback.softplus

__all__ = ["BACKEND", "BACKENDS", "enum_log_sum", "group_coefficients", "hoyer_rows", "softplus"]
