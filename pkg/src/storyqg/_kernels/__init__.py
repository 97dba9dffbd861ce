"""Numeric kernel backend selection.

The hot inner loops (elementwise activations and their gradients, row
softmax, the Adam update, LCS length) exist twice: a Cython extension
(``kernels_cy``) and a pure-numpy fallback (``kernels_py``). The compiled
backend is preferred when importable; ``STORYQG_BACKEND=python`` or
``STORYQG_BACKEND=cython`` forces a choice. ``benchmarks/bench_backends.py``
compares the two.
"""

import os

_forced = os.environ.get("STORYQG_BACKEND", "").strip().lower()

if _forced in ("python", "py"):
    from . import kernels_py as kern
elif _forced in ("cython", "cy"):
    from . import kernels_cy as kern  # type: ignore[no-redef]
elif _forced:
    raise ImportError(f"unknown STORYQG_BACKEND value: {_forced!r}")
else:
    try:
        from . import kernels_cy as kern  # type: ignore[no-redef]
    except ImportError:
        from . import kernels_py as kern

BACKEND = kern.BACKEND

__all__ = ["kern", "BACKEND"]
