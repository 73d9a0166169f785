"""Backend selection for the bootstrap hot kernel.

The compiled extension is used when it was built; otherwise the pure-numpy
implementation takes over.  Override with the environment variable
``SURVCONCORD_BACKEND`` set to ``c``, ``python`` or ``auto`` (default).
Both backends compute the same sums; tiny floating-point differences from
summation order are possible, so exact reproducibility is guaranteed only
within one backend.
"""

import importlib
import os

from . import pyref

_CHOICES = ("auto", "c", "python")
_requested = os.environ.get("SURVCONCORD_BACKEND", "auto").lower()
if _requested not in _CHOICES:
    raise RuntimeError(
        f"SURVCONCORD_BACKEND must be one of {_CHOICES}, got {_requested!r}"
    )


def _load_compiled():
    try:
        return importlib.import_module(__name__ + "._speedups")
    except ImportError:
        return None


_compiled = _load_compiled() if _requested in ("auto", "c") else None
if _requested == "c" and _compiled is None:
    raise ImportError(
        "SURVCONCORD_BACKEND=c but the compiled kernels are not built; "
        "run `python setup.py build_ext --inplace` or reinstall with Cython"
    )

if _compiled is not None:
    BACKEND = "c"
    batch_core = _compiled.batch_core
else:
    BACKEND = "python"
    batch_core = pyref.batch_core


def get_backend() -> str:
    """Name of the active backend, ``"c"`` or ``"python"``."""
    return BACKEND


def compiled_backend():
    """The compiled kernel module, or None when it is not built."""
    return _compiled
