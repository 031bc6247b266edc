"""Kernel backend selection.

The compiled extension is used when it has been built; otherwise the numpy
fallback is imported. Set ``HITFORGE_PURE=1`` to force the fallback.
"""
import os

from . import _pykernels as pure

if os.environ.get("HITFORGE_PURE"):
    compiled = None
else:
    try:
        from . import _ckernels as compiled
    except ImportError:  # extension not built
        compiled = None

backend = compiled if compiled is not None else pure
BACKEND_NAME = "compiled" if compiled is not None else "pure"

best_split = backend.best_split
smo_solve = backend.smo_solve

__all__ = ["best_split", "smo_solve", "BACKEND_NAME", "compiled", "pure"]
