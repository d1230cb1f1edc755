"""Hot kernels with a compiled core and a numpy fallback.

The compiled extension ``_core`` is used when it imports; otherwise the
pure-Python module is used. Setting ``FRACINV_PURE_PYTHON=1`` forces the
fallback (the benchmark and the kernel-parity tests rely on this switch).
"""
import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("FRACINV_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _core as _impl  # noqa: F811

        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _fallback

series_sum = _impl.series_sum
series_batch = _impl.series_batch
contour_sum = _impl.contour_sum
l1_caputo = _impl.l1_caputo

__all__ = ["BACKEND", "series_sum", "series_batch", "contour_sum", "l1_caputo"]
