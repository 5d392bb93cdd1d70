"""Diffeomorphism groups of the circle and the 2-torus.

Group elements are stored as identity-plus-displacement: a CircleDiffeo is
x -> x + u(x), a TorusDiffeo is (x, y) -> (x + u(x,y), y + w(x,y)), and a
FiberDiffeo moves exactly one coordinate, so preservation of the other is
structural rather than numerical.  Circle displacements are kept unreduced
(real-valued lifts), which makes winding and rotation numbers well defined
without branch cuts.

Operations: composition, inversion by damped fixed-point iteration,
time-1 flow of displacement vector fields (classical 4th-order integrator),
rotation numbers via orbit averages, and graded distance to the identity.
"""

import numpy as np

from . import _kernels
from .errors import BasinError, ConvergenceError, InvariantViolation
from .fields import PeriodicField, field_from_payload, field_to_payload, grid_points, seminorm

INJECTIVITY_BOUND = 0.2
FLOW_FIELD_BOUND = 0.2
_JACOBIAN_OVERSAMPLE = 4


class VerticalField:
    """Displacement field along one coordinate only.

    axis 1 means the field points in the y direction (tangent to the fibers
    of (x, y) -> x); axis 2 points in x.  component is a 2d PeriodicField.
    """

    __slots__ = ("axis", "component")

    def __init__(self, axis, component):
        if axis not in (1, 2):
            raise ValueError("axis must be 1 or 2")
        if component.dimension != 2:
            raise ValueError("vertical fields live on the torus")
        self.axis = axis
        self.component = component


def _reduced(field):
    """Subtract the nearest integer to the mean (whole winding turns)."""
    shift = np.rint(field.mean())
    if shift == 0.0:
        return field
    return field - shift


def distance_to_identity(f, n):
    """Max over displacement components of the order-n seminorm.

    Constant displacements are wrapped to the nearest lift, so rotations by
    b and by 1 - b are equally far from the identity.
    """
    return max(seminorm(_reduced(d), n) for d in f.displacements())


class CircleDiffeo:
    """Orientation-preserving diffeomorphism of S^1: x -> x + u(x)."""

    __slots__ = ("u",)

    kind = "circle"

    def __init__(self, displacement, validate=True):
        if displacement.dimension != 1:
            raise ValueError("circle displacement must be one-dimensional")
        self.u = displacement
        if validate:
            du = displacement.derivative(0, 1)
            m = float(du.oversampled_values(_JACOBIAN_OVERSAMPLE).min())
            if 1.0 + m <= 0.0:
                raise InvariantViolation(
                    f"not orientation-preserving: min(1 + u') = {1.0 + m:.3e}")

    @property
    def grid_size(self):
        return self.u.grid_size

    @classmethod
    def identity(cls, grid_size):
        return cls(PeriodicField.zero(1, grid_size), validate=False)

    @classmethod
    def rotation(cls, beta, grid_size):
        return cls(PeriodicField.constant(beta, 1, grid_size), validate=False)

    def displacements(self):
        return (self.u,)

    def __call__(self, points, fast=False):
        pts = np.asarray(points, dtype=np.float64)
        return pts + self.u.evaluate(pts, fast=fast)


class TorusDiffeo:
    """Diffeomorphism of T^2 given by a displacement pair (u, w).

    Constructors enforce a positive Jacobian on the oversampled grid, and by
    default also the C^1 injectivity bound that guarantees the map is a
    global bijection rather than merely a local diffeomorphism.
    validate: "full" (oversampled checks), "grid" (coarse grid only), or
    "none" for trusted intermediates inside iteration loops.
    """

    __slots__ = ("u", "w")

    kind = "torus"

    def __init__(self, u, w, validate="full", injectivity_bound=INJECTIVITY_BOUND):
        if u.dimension != 2 or w.dimension != 2 or u.grid_size != w.grid_size:
            raise ValueError("torus displacements must be matching 2d fields")
        self.u = u
        self.w = w
        if validate != "none":
            _check_torus_jacobian(u, w, validate, injectivity_bound)

    @property
    def grid_size(self):
        return self.u.grid_size

    @classmethod
    def identity(cls, grid_size):
        z = PeriodicField.zero(2, grid_size)
        return cls(z, z, validate="none")

    @classmethod
    def rotation(cls, shifts, grid_size):
        a, b = shifts
        return cls(PeriodicField.constant(a, 2, grid_size),
                   PeriodicField.constant(b, 2, grid_size), validate="none")

    def displacements(self):
        return (self.u, self.w)

    def __call__(self, points, fast=False):
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        du, dw = _evaluate_displacement_pair(self.u, self.w, pts, fast)
        return np.stack([pts[:, 0] + du, pts[:, 1] + dw], axis=1)


class FiberDiffeo:
    """Fiber-preserving torus diffeomorphism.

    axis 1 fixes x and moves y: (x, y) -> (x, y + w(x, y)); every fiber
    {x} x S^1 maps to itself.  axis 2 fixes y and moves x.  The untouched
    coordinate is structurally identical, not approximately.
    """

    __slots__ = ("axis", "displacement")

    kind = "fiber"

    def __init__(self, axis, displacement, validate="full"):
        if axis not in (1, 2):
            raise ValueError("axis must be 1 or 2")
        if displacement.dimension != 2:
            raise ValueError("fiber displacement must be a 2d field")
        self.axis = axis
        self.displacement = displacement
        if validate != "none":
            vert_axis = 1 if axis == 1 else 0
            d = displacement.derivative(vert_axis, 1)
            vals = d.oversampled_values(
                _JACOBIAN_OVERSAMPLE if validate == "full" else 1)
            m = float(vals.min())
            if 1.0 + m <= 0.0:
                raise InvariantViolation(
                    f"fiber map not orientation-preserving along axis {axis}: "
                    f"min(1 + d) = {1.0 + m:.3e}")

    @property
    def grid_size(self):
        return self.displacement.grid_size

    @classmethod
    def identity(cls, axis, grid_size):
        return cls(axis, PeriodicField.zero(2, grid_size), validate="none")

    def displacements(self):
        return (self.displacement,)

    def as_torus(self, validate="none"):
        zero = PeriodicField.zero(2, self.grid_size)
        if self.axis == 1:
            return TorusDiffeo(zero, self.displacement, validate=validate)
        return TorusDiffeo(self.displacement, zero, validate=validate)

    def __call__(self, points, fast=False):
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        d = self.displacement.evaluate(pts, fast=fast)
        out = pts.copy()
        out[:, 1 if self.axis == 1 else 0] += d
        return out


def _check_torus_jacobian(u, w, level, injectivity_bound):
    factor = _JACOBIAN_OVERSAMPLE if level == "full" else 1
    ux = u.derivative(0, 1).oversampled_values(factor)
    uy = u.derivative(1, 1).oversampled_values(factor)
    wx = w.derivative(0, 1).oversampled_values(factor)
    wy = w.derivative(1, 1).oversampled_values(factor)
    det = (1.0 + ux) * (1.0 + wy) - uy * wx
    dmin = float(det.min())
    if dmin <= 0.0:
        raise InvariantViolation(f"Jacobian determinant not positive: min = {dmin:.3e}")
    if injectivity_bound is not None:
        c1 = max(np.abs(ux).max(), np.abs(uy).max(), np.abs(wx).max(), np.abs(wy).max())
        c1 = max(c1, np.abs(_reduced(u).values).max(), np.abs(_reduced(w).values).max())
        if c1 >= injectivity_bound:
            raise InvariantViolation(
                f"C1 distance to identity {c1:.4f} exceeds the injectivity "
                f"bound {injectivity_bound}; global bijectivity is not guaranteed")


def _evaluate_displacement_pair(u, w, pts, fast):
    """Evaluate two 2d fields at the same points, sharing tap weights."""
    x = np.ascontiguousarray(np.mod(pts[:, 0], 1.0))
    y = np.ascontiguousarray(np.mod(pts[:, 1], 1.0))
    if not fast:
        return u.evaluate(pts, fast=False), w.evaluate(pts, fast=False)
    pu = u._spline_plan()
    pw = w._spline_plan()
    degree = max(pu[0], pw[0])
    refine = max(pu[1], pw[1])
    ca, fine = u._spline_coeffs(degree, refine)
    cb, _ = w._spline_coeffs(degree, refine)
    return _kernels.spline_eval_2d_pair(ca, cb, fine, fine, x, y, degree)


# -- composition -------------------------------------------------------------


def compose(f, g, validate="full"):
    """Composition f after g, staying in the most structured common kind.

    Circle with circle gives a circle map; fiber maps of equal axis stay
    fiber maps of that axis (the untouched coordinate is never evaluated, so
    preservation is exact); any other torus combination widens to a general
    TorusDiffeo.  Spectra of composites live on the common grid, truncated
    at its Nyquist frequency by sampling.
    """
    if isinstance(f, CircleDiffeo) and isinstance(g, CircleDiffeo):
        x = grid_points(f.grid_size)
        vals = g.u.values + f.u.evaluate(x + g.u.values, fast=True)
        return CircleDiffeo(PeriodicField(vals, copy=False),
                            validate=validate != "none")
    if isinstance(f, FiberDiffeo) and isinstance(g, FiberDiffeo) and f.axis == g.axis:
        n = f.grid_size
        xx, yy = np.meshgrid(grid_points(n), grid_points(n), indexing="ij")
        if f.axis == 1:
            pts = np.stack([xx.ravel(), (yy + g.displacement.values).ravel()], axis=1)
        else:
            pts = np.stack([(xx + g.displacement.values).ravel(), yy.ravel()], axis=1)
        vals = g.displacement.values + f.displacement.evaluate(pts, fast=True).reshape(n, n)
        return FiberDiffeo(f.axis, PeriodicField(vals, copy=False), validate=validate)
    if isinstance(f, CircleDiffeo) or isinstance(g, CircleDiffeo):
        raise TypeError("cannot compose circle and torus diffeomorphisms")

    ft = f.as_torus() if isinstance(f, FiberDiffeo) else f
    gt = g.as_torus() if isinstance(g, FiberDiffeo) else g
    n = ft.grid_size
    if gt.grid_size != n:
        raise ValueError("grid size mismatch")
    xx, yy = np.meshgrid(grid_points(n), grid_points(n), indexing="ij")
    pts = np.stack([(xx + gt.u.values).ravel(), (yy + gt.w.values).ravel()], axis=1)
    du, dw = _evaluate_displacement_pair(ft.u, ft.w, pts, fast=True)
    u = PeriodicField(gt.u.values + du.reshape(n, n), copy=False)
    w = PeriodicField(gt.w.values + dw.reshape(n, n), copy=False)
    return TorusDiffeo(u, w, validate=validate)


# -- inversion ---------------------------------------------------------------

def invert(f, initial=None, tol=1e-13, max_iterations=200):
    """Group inverse by the fixed-point iteration d(p) = -u(p + d(p)).

    The iteration is damped by 1/2 when the C^1 distance to the identity
    exceeds 0.1 (plain contraction otherwise).  An optional initial guess
    (displacement array or diffeo of the same kind) warm-starts the loop.
    """
    damping = 1.0 if max(_grid_c1(_reduced(d)) for d in f.displacements()) <= 0.1 else 0.5
    if isinstance(f, CircleDiffeo):
        x = grid_points(f.grid_size)
        d = np.zeros_like(x) if initial is None else np.array(_initial_array(initial, 1))
        history = []
        for _ in range(max_iterations):
            target = -f.u.evaluate(x + d, fast=True)
            step = np.abs(target - d).max()
            history.append(step)
            d = d + damping * (target - d)
            if step <= tol:
                return CircleDiffeo(PeriodicField(d, copy=False), validate=False)
        raise ConvergenceError(
            f"inversion did not converge; last update {history[-1]:.3e}", history)

    ft = f
    n = f.grid_size
    xx, yy = np.meshgrid(grid_points(n), grid_points(n), indexing="ij")
    if isinstance(f, FiberDiffeo):
        d = np.zeros((n, n)) if initial is None else np.array(_initial_array(initial, 2))
        history = []
        for _ in range(max_iterations):
            if f.axis == 1:
                pts = np.stack([xx.ravel(), (yy + d).ravel()], axis=1)
            else:
                pts = np.stack([(xx + d).ravel(), yy.ravel()], axis=1)
            target = -f.displacement.evaluate(pts, fast=True).reshape(n, n)
            step = np.abs(target - d).max()
            history.append(step)
            d = d + damping * (target - d)
            if step <= tol:
                return FiberDiffeo(f.axis, PeriodicField(d, copy=False), validate="none")
        raise ConvergenceError(
            f"inversion did not converge; last update {history[-1]:.3e}", history)

    if initial is None:
        du = np.zeros((n, n))
        dw = np.zeros((n, n))
    else:
        du, dw = _initial_array(initial, 2, pair=True)
        du = np.array(du)
        dw = np.array(dw)
    history = []
    for _ in range(max_iterations):
        pts = np.stack([(xx + du).ravel(), (yy + dw).ravel()], axis=1)
        eu, ew = _evaluate_displacement_pair(ft.u, ft.w, pts, fast=True)
        tu = -eu.reshape(n, n)
        tw = -ew.reshape(n, n)
        step = max(np.abs(tu - du).max(), np.abs(tw - dw).max())
        history.append(step)
        du = du + damping * (tu - du)
        dw = dw + damping * (tw - dw)
        if step <= tol:
            return TorusDiffeo(PeriodicField(du, copy=False),
                               PeriodicField(dw, copy=False), validate="none")
    raise ConvergenceError(
        f"inversion did not converge; last update {history[-1]:.3e}", history)


def _initial_array(initial, dimension, pair=False):
    if isinstance(initial, CircleDiffeo):
        return initial.u.values
    if isinstance(initial, FiberDiffeo):
        return initial.displacement.values
    if isinstance(initial, TorusDiffeo):
        return (initial.u.values, initial.w.values)
    if pair:
        return initial
    return np.asarray(initial)


# -- exponential (time-1 flow) ----------------------------------------------

def exp_field(X, steps=16, validate="full", field_bound=FLOW_FIELD_BOUND):
    """Time-1 flow of an autonomous displacement field.

    X is a 1d PeriodicField (circle), a VerticalField (flows to a
    FiberDiffeo of the same axis; the base coordinate is never integrated,
    so fiber preservation is exact), or a pair (U, W) of 2d fields.  Uses
    the classical 4-stage integrator with `steps` substeps; refining steps
    converges at 4th order.  The zero field returns the identity exactly.
    """
    if isinstance(X, PeriodicField):
        if X.dimension != 1:
            raise ValueError("expected a 1d field for a circle flow")
        _check_flow_bound(X, field_bound)
        if not X.values.any():
            return CircleDiffeo.identity(X.grid_size)
        x = grid_points(X.grid_size)
        d = _flow_displacement_1d(X, x, steps)
        return CircleDiffeo(PeriodicField(d, copy=False), validate=validate != "none")

    if isinstance(X, VerticalField):
        comp = X.component
        _check_flow_bound(comp, field_bound)
        if not comp.values.any():
            return FiberDiffeo.identity(X.axis, comp.grid_size)
        n = comp.grid_size
        xx, yy = np.meshgrid(grid_points(n), grid_points(n), indexing="ij")
        moving = (yy if X.axis == 1 else xx).ravel()
        fixed = (xx if X.axis == 1 else yy).ravel()
        d = np.zeros_like(moving)
        h = 1.0 / steps

        def rhs(disp):
            if X.axis == 1:
                pts = np.stack([fixed, moving + disp], axis=1)
            else:
                pts = np.stack([moving + disp, fixed], axis=1)
            return comp.evaluate(pts, fast=True)

        for _ in range(steps):
            k1 = rhs(d)
            k2 = rhs(d + 0.5 * h * k1)
            k3 = rhs(d + 0.5 * h * k2)
            k4 = rhs(d + h * k3)
            d = d + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return FiberDiffeo(X.axis, PeriodicField(d.reshape(n, n), copy=False),
                           validate=validate)

    U, W = X
    if U.dimension != 2 or W.dimension != 2:
        raise ValueError("expected a pair of 2d fields for a torus flow")
    _check_flow_bound(U, field_bound)
    _check_flow_bound(W, field_bound)
    if not U.values.any() and not W.values.any():
        return TorusDiffeo.identity(U.grid_size)
    n = U.grid_size
    xx, yy = np.meshgrid(grid_points(n), grid_points(n), indexing="ij")
    x0 = xx.ravel()
    y0 = yy.ravel()
    du = np.zeros_like(x0)
    dw = np.zeros_like(y0)
    h = 1.0 / steps
    for _ in range(steps):
        p1 = np.stack([x0 + du, y0 + dw], axis=1)
        k1u, k1w = _evaluate_displacement_pair(U, W, p1, fast=True)
        p2 = np.stack([x0 + du + 0.5 * h * k1u, y0 + dw + 0.5 * h * k1w], axis=1)
        k2u, k2w = _evaluate_displacement_pair(U, W, p2, fast=True)
        p3 = np.stack([x0 + du + 0.5 * h * k2u, y0 + dw + 0.5 * h * k2w], axis=1)
        k3u, k3w = _evaluate_displacement_pair(U, W, p3, fast=True)
        p4 = np.stack([x0 + du + h * k3u, y0 + dw + h * k3w], axis=1)
        k4u, k4w = _evaluate_displacement_pair(U, W, p4, fast=True)
        du = du + (h / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
        dw = dw + (h / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
    return TorusDiffeo(PeriodicField(du.reshape(n, n), copy=False),
                       PeriodicField(dw.reshape(n, n), copy=False), validate=validate)


def _flow_displacement_1d(X, x, steps):
    d = np.zeros_like(x)
    h = 1.0 / steps
    for _ in range(steps):
        k1 = X.evaluate(x + d, fast=True)
        k2 = X.evaluate(x + d + 0.5 * h * k1, fast=True)
        k3 = X.evaluate(x + d + 0.5 * h * k2, fast=True)
        k4 = X.evaluate(x + d + h * k3, fast=True)
        d = d + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return d


def _grid_c1(field):
    """Cheap C^1 bound surrogate: sup of value and first derivatives on the
    sample grid (no oversampling); used for damping and basin guards."""
    m = float(np.abs(field.values).max())
    for axis in range(field.dimension):
        m = max(m, float(np.abs(field.derivative(axis, 1).values).max()))
    return m


def _check_flow_bound(field, bound):
    if bound is None:
        return
    c1 = _grid_c1(field)
    if c1 > bound:
        raise BasinError(
            f"flow field C1 norm {c1:.4f} exceeds the bound {bound}; "
            "the time-1 flow may leave the diffeomorphism group")


# -- rotation number ----------------------------------------------------------

def rotation_number(f, iterations=100000, x0=0.0):
    """Average lift translation lim (F^k(x) - x) / k.

    Exact for rigid rotations; error is O(1/iterations) in general and
    O(sup|g - id| / iterations) for conjugates g R g^{-1} of rotations.
    """
    u = f.u
    vmin = float(u.values.min())
    vmax = float(u.values.max())
    if vmin == vmax:
        return vmin
    degree, refine, _ = u._spline_plan()
    padded, fine = u._spline_coeffs(degree, refine)
    xk = _kernels.orbit_lift(padded, fine, degree, float(x0), int(iterations))
    return (xk - float(x0)) / float(iterations)


# -- serialization ------------------------------------------------------------

def diffeo_to_payload(f):
    if isinstance(f, CircleDiffeo):
        return {"kind": "circle", "grid": f.grid_size,
                "displacements": {"u": field_to_payload(f.u)}}
    if isinstance(f, TorusDiffeo):
        return {"kind": "torus", "grid": f.grid_size,
                "displacements": {"u": field_to_payload(f.u),
                                  "w": field_to_payload(f.w)}}
    if isinstance(f, FiberDiffeo):
        kind = "fiber1" if f.axis == 1 else "fiber2"
        key = "w" if f.axis == 1 else "v"
        return {"kind": kind, "grid": f.grid_size,
                "displacements": {key: field_to_payload(f.displacement)}}
    raise TypeError(f"not a diffeomorphism: {type(f)!r}")


def diffeo_from_payload(payload, validate="full"):
    kind = payload["kind"]
    disp = payload["displacements"]
    if kind == "circle":
        return CircleDiffeo(field_from_payload(disp["u"]), validate=validate != "none")
    if kind == "torus":
        return TorusDiffeo(field_from_payload(disp["u"]),
                           field_from_payload(disp["w"]), validate=validate)
    if kind == "fiber1":
        return FiberDiffeo(1, field_from_payload(disp["w"]), validate=validate)
    if kind == "fiber2":
        return FiberDiffeo(2, field_from_payload(disp["v"]), validate=validate)
    raise ValueError(f"unknown diffeo kind {kind!r}")
