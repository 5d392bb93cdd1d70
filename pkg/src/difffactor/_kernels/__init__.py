"""Evaluation kernels with backend selection.

The compiled Cython extension is preferred; the numpy implementation in
_ref.py is the fallback and the test oracle.  Set DIFFFACTOR_FORCE_NUMPY=1
to skip the extension (used by the benchmark and the equivalence tests).

Coefficient arrays passed to the kernels must be halo-padded with
pad_coeffs so tap loops never wrap.
"""

import os

from . import _ref
from ._ref import bspline_weights, pad_coeffs

if os.environ.get("DIFFFACTOR_FORCE_NUMPY"):
    _impl = _ref
else:
    try:
        from . import _compiled as _impl
    except ImportError:
        _impl = _ref

BACKEND = _impl.BACKEND

spline_eval_1d = _impl.spline_eval_1d
spline_eval_1d_batch = _impl.spline_eval_1d_batch
spline_eval_2d = _impl.spline_eval_2d
spline_eval_2d_pair = _impl.spline_eval_2d_pair
orbit_lift = _impl.orbit_lift
