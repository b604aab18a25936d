"""Backend selection for the hot propagation kernels.

Two interchangeable implementations exist in ``_kernels``: numba-compiled
loops and pure-numpy twins. The active one is chosen once at import time:

* ``MATRYOSHKA_BACKEND=numpy`` forces the pure-numpy path,
* ``MATRYOSHKA_BACKEND=numba`` requires numba (raises if unavailable),
* unset: numba when importable, numpy otherwise.
"""

import os

_env = os.environ.get("MATRYOSHKA_BACKEND", "").strip().lower()

if _env not in ("", "numba", "numpy"):
    raise RuntimeError(
        f"MATRYOSHKA_BACKEND={_env!r} not understood (use 'numba' or 'numpy')"
    )

if _env == "numpy":
    NUMBA_AVAILABLE = False
else:
    try:
        import numba  # noqa: F401

        NUMBA_AVAILABLE = True
    except ImportError:
        if _env == "numba":
            raise
        NUMBA_AVAILABLE = False

BACKEND = "numba" if NUMBA_AVAILABLE else "numpy"
