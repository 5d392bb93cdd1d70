"""Loops of circle diffeomorphisms over a circle base.

A LoopSection samples a family x -> F_x of circle maps on the base grid:
row b of the displacement array is the displacement of the fiber map over
base point b/B.  This is the section picture of a fiber-preserving torus
map; as_fiber_diffeo/from_fiber_diffeo convert without loss.

All row operations act on each row with that row's data only (row-wise
spectral shifts, row-wise spline evaluation), so fibers never couple and
results do not depend on any execution order.
"""

import numpy as np

from . import _kernels
from .errors import ConvergenceError
from .fields import PeriodicField, spline_mode_error, wavenumbers
from .groups import CircleDiffeo, FiberDiffeo

_ERR_TARGET = 1e-12
_CANDIDATES = ((5, 1), (5, 2), (9, 1), (5, 4), (9, 2), (9, 4))


class RowField:
    """A batch of independent 1d periodic fields (rows), with shared lazy
    spectral/spline caches.  The workhorse behind LoopSection."""

    __slots__ = ("rows", "grid_size", "_cache")

    def __init__(self, rows, copy=True):
        arr = np.asarray(rows, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("row batch must be 2d")
        if copy:
            arr = arr.copy()
        arr.setflags(write=False)
        self.rows = arr
        self.grid_size = arr.shape[1]
        self._cache = {}

    @classmethod
    def zero(cls, nrows, grid_size):
        return cls(np.zeros((nrows, grid_size)), copy=False)

    @property
    def spectra(self):
        spec = self._cache.get("spectra")
        if spec is None:
            spec = np.fft.fft(self.rows, axis=1) / self.grid_size
            self._cache["spectra"] = spec
        return spec

    def sup_per_row(self):
        return np.abs(self.rows).max(axis=1)

    def means(self):
        return self.rows.mean(axis=1)

    def shifted(self, alpha):
        """Row r becomes x -> row_r(x + alpha_r): exact spectral shift."""
        alpha = np.asarray(alpha, dtype=np.float64)
        k = wavenumbers(self.grid_size)
        if alpha.ndim == 0:
            mult = np.exp(2j * np.pi * k * float(alpha))[None, :]
        else:
            mult = np.exp(2j * np.pi * np.outer(alpha, k))
        vals = np.fft.ifft(self.spectra * mult, axis=1).real * self.grid_size
        return RowField(vals, copy=False)

    def _plan(self):
        plan = self._cache.get("plan")
        if plan is None:
            mags = np.abs(self.spectra).max(axis=0)
            n = self.grid_size
            k = np.abs(wavenumbers(n)).astype(int)
            prof = np.zeros(n // 2 + 1)
            np.maximum.at(prof, k, mags)
            # every row's error is bounded by the max-magnitude profile
            plan = None
            best = None
            for degree, refine in _CANDIDATES:
                fine = refine * n
                err = float(np.sum(prof[1:] * spline_mode_error(
                    np.arange(1, len(prof)) / fine, degree)))
                if best is None or err < best[2]:
                    best = (degree, refine, err)
                if err <= _ERR_TARGET:
                    break
            plan = best
            self._cache["plan"] = plan
        return plan

    def _padded(self, degree, refine):
        key = ("coeffs", degree, refine)
        entry = self._cache.get(key)
        if entry is None:
            n = self.grid_size
            fine = refine * n
            spec = self.spectra
            if fine != n:
                half = n // 2
                big = np.zeros((spec.shape[0], fine), dtype=complex)
                big[:, :half] = spec[:, :half]
                big[:, fine - half + 1:] = spec[:, half + 1:]
                big[:, half] = 0.5 * spec[:, half]
                big[:, fine - half] += 0.5 * spec[:, half]
                spec = big
            beta = _kernels.bspline_weights(np.array([0.0]), degree)[0]
            offsets = (degree - 1) // 2 - np.arange(degree + 1)
            k = wavenumbers(fine)
            bhat = np.zeros(fine, dtype=complex)
            for b, off in zip(beta, offsets):
                bhat += b * np.exp(-2j * np.pi * k * off / fine)
            coeffs = np.fft.ifft(spec / bhat[None, :], axis=1).real * fine
            padded = np.ascontiguousarray(
                np.pad(coeffs, ((0, 0), (0, degree + 1)), mode="wrap"))
            entry = (padded, fine)
            self._cache[key] = entry
        return entry

    def eval_rows(self, pts):
        """Row r of the result is row_r evaluated at pts[r] (mod 1)."""
        degree, refine, _ = self._plan()
        padded, fine = self._padded(degree, refine)
        p = np.ascontiguousarray(np.mod(pts, 1.0))
        return _kernels.spline_eval_1d_batch(padded, fine, p, degree)


def compose_rows(f, g, x):
    """Row-wise composition f_r o g_r; x is the shared fiber grid."""
    gv = g.rows
    return RowField(gv + f.eval_rows(x[None, :] + gv), copy=False)


def invert_rows(f, x, initial=None, tol=1e-13, max_iterations=200):
    """Row-wise fixed-point inversion d = -u(x + d)."""
    d = np.zeros_like(f.rows) if initial is None else np.array(initial.rows)
    c1 = np.abs(np.fft.ifft(
        f.spectra * (2j * np.pi * wavenumbers(f.grid_size))[None, :],
        axis=1).real * f.grid_size).max()
    damping = 1.0 if c1 <= 0.1 else 0.5
    for _ in range(max_iterations):
        target = -f.eval_rows(x[None, :] + d)
        step = np.abs(target - d).max()
        d = d + damping * (target - d)
        if step <= tol:
            return RowField(d, copy=False)
    raise ConvergenceError(f"row inversion stalled at step {step:.3e}")


def exp_rows(X, x, steps=4):
    """Row-wise time-1 flow of displacement fields (4th-order integrator)."""
    if not X.rows.any():
        return RowField.zero(*X.rows.shape)
    d = np.zeros_like(X.rows)
    h = 1.0 / steps
    xb = x[None, :]
    for _ in range(steps):
        k1 = X.eval_rows(xb + d)
        k2 = X.eval_rows(xb + d + 0.5 * h * k1)
        k3 = X.eval_rows(xb + d + 0.5 * h * k2)
        k4 = X.eval_rows(xb + d + h * k3)
        d = d + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return RowField(d, copy=False)


class LoopSection:
    """Family of circle diffeomorphisms sampled over the base circle."""

    __slots__ = ("field",)

    def __init__(self, displacements, copy=True):
        f = displacements if isinstance(displacements, RowField) else \
            RowField(displacements, copy=copy)
        self.field = f

    @property
    def base_size(self):
        return self.field.rows.shape[0]

    @property
    def fiber_size(self):
        return self.field.rows.shape[1]

    @property
    def displacements(self):
        return self.field.rows

    @classmethod
    def identity(cls, base_size, fiber_size):
        return cls(RowField.zero(base_size, fiber_size))

    @classmethod
    def from_fiber_diffeo(cls, fd):
        """Axis-1 maps loop over x (rows as stored); axis-2 over y."""
        vals = fd.displacement.values
        return cls(vals if fd.axis == 1 else vals.T)

    def as_fiber_diffeo(self, axis, validate="none"):
        vals = self.displacements if axis == 1 else self.displacements.T
        return FiberDiffeo(axis, PeriodicField(vals), validate=validate)

    def fiber(self, index, validate=False):
        return CircleDiffeo(PeriodicField(self.displacements[index]),
                            validate=validate)

    def base_c1_norm(self):
        """Sup over the grid of the base-direction derivative plus sup."""
        spec = np.fft.fft(self.displacements, axis=0) / self.base_size
        dk = 2j * np.pi * wavenumbers(self.base_size)
        dk[self.base_size // 2] = 0.0
        dvals = np.fft.ifft(spec * dk[:, None], axis=0).real * self.base_size
        return max(float(np.abs(self.displacements).max()),
                   float(np.abs(dvals).max()))

    def lowpass_base(self, cutoff):
        """Low-pass filter across the base variable (not within fibers)."""
        spec = np.fft.fft(self.displacements, axis=0) / self.base_size
        k = np.abs(wavenumbers(self.base_size))
        spec[k > cutoff, :] = 0.0
        return LoopSection(np.fft.ifft(spec, axis=0).real * self.base_size,
                           copy=False)
