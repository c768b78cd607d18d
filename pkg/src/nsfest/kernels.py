"""Kernel backend selection.

The compiled extension ``nsfest._kernels`` is used when it is importable,
otherwise the numpy versions in ``nsfest._kernels_py``. Setting the
environment variable ``NSFEST_PURE_PYTHON=1`` forces the numpy versions.
"""

import os

from . import _kernels_py as python_backend

compiled_backend = None
if not os.environ.get("NSFEST_PURE_PYTHON"):
    try:
        from . import _kernels as compiled_backend
    except ImportError:
        compiled_backend = None

_active = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

dense_terms = _active.dense_terms
sparse_terms = _active.sparse_terms

__all__ = ["BACKEND", "dense_terms", "sparse_terms", "python_backend", "compiled_backend"]
