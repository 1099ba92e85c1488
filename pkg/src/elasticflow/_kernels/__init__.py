"""Hot numerical kernels with a compiled core and a pure Python fallback.

The compiled extension (``_fast``, built from Cython) is preferred when
available; otherwise the numpy/scipy reference implementation is used.
Set ``ELASTICFLOW_BACKEND=reference`` to force the fallback, or
``ELASTICFLOW_BACKEND=fast`` to require the extension.
"""

import os

from . import _reference

_requested = os.environ.get("ELASTICFLOW_BACKEND", "").strip().lower()

if _requested == "reference":
    _impl = _reference
elif _requested == "fast":
    from . import _fast as _impl  # raises ImportError if not built
else:
    try:
        from . import _fast as _impl
    except ImportError:
        _impl = _reference

BACKEND = _impl.BACKEND_NAME
periodic_derivatives = _impl.periodic_derivatives
curve_velocity = _impl.curve_velocity
solve_cyclic_banded = _impl.solve_cyclic_banded

__all__ = [
    "BACKEND",
    "periodic_derivatives",
    "curve_velocity",
    "solve_cyclic_banded",
]
