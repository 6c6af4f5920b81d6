"""Geometry kernel dispatch.

The compiled extension is used when it was built; otherwise the numpy
fallback.  Set ``HANGERLAB_PURE_PYTHON=1`` to force the fallback.
"""

import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("HANGERLAB_PURE_PYTHON") != "1":
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        pass


def points_in_polygon(px, py, poly) -> np.ndarray:
    return _impl.points_in_polygon(
        np.ascontiguousarray(px, dtype=float),
        np.ascontiguousarray(py, dtype=float),
        np.ascontiguousarray(poly, dtype=float).reshape(-1, 2),
    )


def points_near_segments(px, py, segs, radius: float) -> np.ndarray:
    return _impl.points_near_segments(
        np.ascontiguousarray(px, dtype=float),
        np.ascontiguousarray(py, dtype=float),
        np.ascontiguousarray(segs, dtype=float).reshape(-1, 4),
        float(radius),
    )
