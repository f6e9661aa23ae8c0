"""Backend selection for the hot numeric kernels.

The compiled extension (``_ckernels``) is used when it was built; otherwise
the pure-Python twin in ``_pykernels`` is loaded.  Setting the environment
variable ``CHAOSVEIL_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _pykernels as python_backend

compiled_backend = None
if os.environ.get("CHAOSVEIL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled_backend  # type: ignore[no-redef]
    except ImportError:  # extension not built
        compiled_backend = None

_active = compiled_backend if compiled_backend is not None else python_backend

BACKEND = _active.BACKEND
DIVERGENCE_LIMIT = _active.DIVERGENCE_LIMIT
cnn_trajectory = _active.cnn_trajectory
cnn_keystream = _active.cnn_keystream
refine_extrema = _active.refine_extrema
byte_from_fraction = _active.byte_from_fraction


def available_backends():
    """Mapping of backend name to module for every importable backend."""
    found = {"python": python_backend}
    try:
        from . import _ckernels
        found["cython"] = _ckernels
    except ImportError:
        pass
    return found
