"""Hot-kernel backend selection: compiled extension if available, NumPy otherwise.

Set CONEKAHLER_PURE_PYTHON=1 to force the fallback (used by the parity tests
and the benchmark).
"""

import os

from . import kernels_py

if os.environ.get("CONEKAHLER_PURE_PYTHON") == "1":
    _impl = kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = kernels_py
        BACKEND = "python"

poisson_sum = _impl.poisson_sum
green_sum = _impl.green_sum


def backend_name() -> str:
    """Which kernel implementation is active ('compiled' or 'python')."""
    return BACKEND
