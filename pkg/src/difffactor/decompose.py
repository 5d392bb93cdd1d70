"""Decomposition of a near-identity torus diffeomorphism into fiber factors.

Factors f = f1 o f2 where f1 preserves the fibers of (x, y) -> x and f2
preserves the fibers of (x, y) -> y.  The Newton step inverts the
derivative of the composition map in its left trivialization,
(xi1, xi2) -> f2^* xi1 + xi2, which on the coordinate frame of the two
vertical distributions reduces to an explicit triangular solve
(right_inverse_tp).  Updates multiply on the right, f_i <- f_i o exp(xi_i),
so that the solved equation matches the update exactly and the iteration
contracts quadratically.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import BasinError, ConvergenceError, FrameDegenerateError
from .fields import PeriodicField, grid_points, smooth
from .groups import (FiberDiffeo, TorusDiffeo, VerticalField, compose,
                     distance_to_identity, exp_field, invert)

DEFAULT_BASIN = 0.1


@dataclass
class DecomposeOptions:
    tolerance: float = 1e-9
    max_iterations: int = 40
    smoothing: tuple | None = None        # None (off) or ("geometric", theta0, ratio)
    damping: float = 1.0
    basin: float = DEFAULT_BASIN
    flow_steps: int = 4

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.smoothing is not None:
            kind, theta0, ratio = self.smoothing
            if kind != "geometric" or theta0 < 1 or ratio <= 1:
                raise ValueError("smoothing must be ('geometric', theta0>=1, ratio>1)")


@dataclass
class DecompositionReport:
    iterations: int = 0
    residual_history: list = field(default_factory=list)   # (C0, C1) per iteration
    converged: bool = False
    final_c0: float = np.inf
    final_c1: float = np.inf
    grid: int = 0
    options: DecomposeOptions | None = None


def right_inverse_tp(f2, X, f2_inverse=None):
    """Solve f2^* xi1 + xi2 = X for vertical fields xi1, xi2.

    f2 is an axis-2 fiber map (x, y) -> (x + v(x, y), y) and X = (X1, X2) is
    a vector field in coordinate components.  The frame (f2^* d/dy, d/dx)
    spans as long as 1 + v_x > 0; decomposing X on it gives

        xi1 = (X2 o f2^{-1}) d/dy,
        xi2 = (X1 + v_y X2 / (1 + v_x)) d/dx.

    An optional precomputed inverse of f2 skips the fixed-point solve.
    """
    if not isinstance(f2, FiberDiffeo) or f2.axis != 2:
        raise ValueError("right_inverse_tp expects an axis-2 fiber map")
    X1, X2 = X
    n = f2.grid_size
    v = f2.displacement
    vx = v.derivative(0, 1)
    vx_min = float(vx.values.min())
    if 1.0 + vx_min <= 0.0:
        bad = np.unravel_index(int(np.argmin(vx.values)), vx.values.shape)
        raise FrameDegenerateError(
            f"frame degenerates: 1 + v_x = {1.0 + vx_min:.3e} near "
            f"(x, y) = ({bad[0] / n:.4f}, {bad[1] / n:.4f})")
    if f2_inverse is None:
        f2_inverse = invert(f2)
    xx, yy = np.meshgrid(grid_points(n), grid_points(n), indexing="ij")
    pts = np.stack([(xx + f2_inverse.displacement.values).ravel(), yy.ravel()], axis=1)
    a_vals = X2.evaluate(pts, fast=True).reshape(n, n)
    vy = v.derivative(1, 1)
    b = X1 + vy * X2 / (1.0 + vx)
    return (VerticalField(1, PeriodicField(a_vals, copy=False)),
            VerticalField(2, b))


def _grid_sup(arr):
    return float(np.abs(arr).max())


def _residual_norms(g):
    c0 = max(_grid_sup(g.u.values), _grid_sup(g.w.values))
    c1 = c0
    for d in (g.u, g.w):
        for axis in (0, 1):
            c1 = max(c1, _grid_sup(d.derivative(axis, 1).values))
    return c0, c1


def decompose(f, opts=None):
    """Factor f into (f1, f2) with f1 o f2 = f within opts.tolerance in C^0.

    Returns (f1, f2, report).  f1 preserves every vertical circle {x} x S^1,
    f2 every horizontal one; preservation is structural.  The factors are
    not unique; only their composition is contractual.
    """
    opts = opts or DecomposeOptions()
    if not isinstance(f, TorusDiffeo):
        f = f.as_torus()
    basin_distance = distance_to_identity(f, 1)
    if basin_distance > opts.basin:
        raise BasinError(
            f"C1 distance to identity {basin_distance:.4f} exceeds the "
            f"decomposition basin {opts.basin}")

    n = f.grid_size
    f1 = FiberDiffeo.identity(1, n)
    f2 = FiberDiffeo.identity(2, n)
    report = DecompositionReport(grid=n, options=opts)
    cinv_warm = None
    f2inv_warm = None

    for it in range(opts.max_iterations + 1):
        c = compose(f1, f2, validate="none")
        cinv = invert(c, initial=cinv_warm)
        cinv_warm = cinv
        g = compose(cinv, f, validate="none")
        c0, c1 = _residual_norms(g)
        report.residual_history.append((c0, c1))
        report.iterations = it
        if c0 <= 0.8 * opts.tolerance:
            report.converged = True
            break
        if it == opts.max_iterations:
            raise ConvergenceError(
                f"decomposition did not reach {opts.tolerance:.1e} in "
                f"{opts.max_iterations} iterations (C0 residual {c0:.3e})",
                history=report.residual_history, report=report)

        f2inv_warm = invert(f2, initial=f2inv_warm)
        xi1, xi2 = right_inverse_tp(f2, (g.u, g.w), f2_inverse=f2inv_warm)
        a = xi1.component
        b = xi2.component
        if opts.smoothing is not None:
            _, theta0, ratio = opts.smoothing
            cutoff = theta0 * ratio ** it
            a = smooth(a, cutoff)
            b = smooth(b, cutoff)
        damping = opts.damping if c1 <= 0.05 else min(opts.damping, 0.5)
        if damping != 1.0:
            a = damping * a
            b = damping * b
        f1 = compose(f1, exp_field(VerticalField(1, a), steps=opts.flow_steps,
                                   validate="none", field_bound=None),
                     validate="none")
        f2 = compose(f2, exp_field(VerticalField(2, b), steps=opts.flow_steps,
                                   validate="none", field_bound=None),
                     validate="none")

    f1 = FiberDiffeo(1, f1.displacement, validate="full")
    f2 = FiberDiffeo(2, f2.displacement, validate="full")
    residual = compose(invert(compose(f1, f2, validate="none"), initial=cinv_warm),
                       f, validate="none")
    report.final_c0 = distance_to_identity(residual, 0)
    report.final_c1 = distance_to_identity(residual, 1)
    if report.final_c0 > opts.tolerance:
        raise ConvergenceError(
            f"final C0 residual {report.final_c0:.3e} exceeds tolerance "
            f"{opts.tolerance:.1e}", history=report.residual_history, report=report)
    return f1, f2, report
