"""Kernel backend selection: compiled extension if available, NumPy fallback.

``BACKEND`` is ``"compiled"`` or ``"python"``. Set the environment variable
``LYAPMOTION_FORCE_PY_KERNELS=1`` before import to force the fallback (used
by the backend-parity tests and the benchmark).
"""

import os

from . import pyfallback

OK = pyfallback.OK
GJK_MAXITER = pyfallback.GJK_MAXITER
EPA_MAXITER = pyfallback.EPA_MAXITER

if os.environ.get("LYAPMOTION_FORCE_PY_KERNELS", "") == "1":
    _impl = pyfallback
    BACKEND = "python"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        if not hasattr(_impl, "signed_distance"):
            raise ImportError("stale or incomplete compiled core")
        BACKEND = "compiled"
    except ImportError:
        _impl = pyfallback
        BACKEND = "python"

signed_distance = _impl.signed_distance
support_index = _impl.support_index

# simplex-level entry points are only needed by the public geometry ops,
# never on hot paths; they always come from the reference implementation
gjk_distance = pyfallback.gjk_distance
enclose_origin = pyfallback.enclose_origin
epa_2d = pyfallback.epa_2d
epa_3d = pyfallback.epa_3d
