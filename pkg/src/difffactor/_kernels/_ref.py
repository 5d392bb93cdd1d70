"""Pure-numpy implementations of the evaluation kernels.

These are the fallback for the compiled extension and the reference the
extension is tested against.  All routines work on period-1 data.

Coefficient arrays are halo-padded: a logical coefficient grid of size M
(samples at j/M) is passed as an array of length M + degree + 1 whose tail
repeats the head, so tap indices never wrap inside the inner loop.  Use
pad_coeffs to build the padded form.
"""

import numpy as np

BACKEND = "numpy"


def pad_coeffs(coeffs, degree):
    """Append a periodic halo of degree+1 entries along every axis."""
    p = int(degree)
    pad = [(0, p + 1)] * coeffs.ndim
    return np.ascontiguousarray(np.pad(coeffs, pad, mode="wrap"))


_WEIGHT_POLYS = {}


def _shift_poly_exact(coeffs, s):
    """Coefficients of q(f) = poly(f + s) in exact rational arithmetic."""
    from fractions import Fraction
    out = [Fraction(0)]
    power = [Fraction(1)]
    for c in coeffs:
        while len(out) < len(power):
            out.append(Fraction(0))
        for d, pw in enumerate(power):
            out[d] += c * pw
        # power *= (f + s)
        nxt = [Fraction(0)] * (len(power) + 1)
        for d, pw in enumerate(power):
            nxt[d] += pw * s
            nxt[d + 1] += pw
        power = nxt
    return out


def weight_polys(degree):
    """Tap-weight polynomials in powers of (frac - 1/2), low-to-high order.

    Row j gives the weight of the coefficient at index
    floor(t) - (degree-1)//2 + j.  The pieces of the uniform B-spline B_p
    are built by the Cox-de Boor recurrence in exact rational arithmetic;
    tap j is B_p(frac + p - j), expanded around the interval midpoint so
    the float coefficients stay O(1) and Horner evaluation keeps full
    precision at every degree.
    """
    from fractions import Fraction
    p = int(degree)
    tab = _WEIGHT_POLYS.get(p)
    if tab is None:
        # pieces[i] = exact coefficients of B_k restricted to [i, i+1)
        pieces = [[Fraction(1)]]
        for k in range(1, p + 1):
            new = []
            for i in range(k + 1):
                acc = [Fraction(0)] * (k + 1)
                if i < len(pieces):
                    for d, c in enumerate(pieces[i]):
                        acc[d + 1] += c                  # u * B_{k-1}(u)
                if 0 <= i - 1 < len(pieces):
                    shifted = _shift_poly_exact(pieces[i - 1], Fraction(-1))
                    for d, c in enumerate(shifted):
                        acc[d] += (k + 1) * c            # (k+1-u) * B_{k-1}(u-1)
                        if d + 1 <= k:
                            acc[d + 1] -= c
                new.append([c / k for c in acc])
            pieces = new
        tab = np.zeros((p + 1, p + 1))
        for j in range(p + 1):
            centered = _shift_poly_exact(pieces[p - j], Fraction(2 * (p - j) + 1, 2))
            for d, c in enumerate(centered):
                if d <= p:
                    tab[j, d] = float(c)
        tab.setflags(write=False)
        _WEIGHT_POLYS[p] = tab
    return tab


def bspline_weights(frac, degree):
    """Centered cardinal B-spline values at the tap offsets.

    frac is an array of fractional parts in [0, 1).  Returns an array of
    shape frac.shape + (degree + 1,) with weights[..., j] the weight of the
    coefficient at index floor(t) - (degree - 1) // 2 + j.  Rows sum to 1.
    """
    frac = np.asarray(frac, dtype=np.float64)
    p = int(degree)
    tab = weight_polys(p)
    s = frac - 0.5
    w = np.empty(frac.shape + (p + 1,), dtype=np.float64)
    for j in range(p + 1):
        acc = np.full(frac.shape, tab[j, p])
        for d in range(p - 1, -1, -1):
            acc = acc * s + tab[j, d]
        w[..., j] = acc
    return w


def _tap_base(pts, m, p):
    t = np.asarray(pts, dtype=np.float64) * m
    base = np.floor(t)
    frac = t - base
    i0 = (base.astype(np.int64) - (p - 1) // 2) % m
    return i0, frac


def spline_eval_1d(padded, m, pts, degree):
    """Evaluate a periodic uniform B-spline at arbitrary period-1 points."""
    p = int(degree)
    i0, frac = _tap_base(pts, m, p)
    w = bspline_weights(frac, p)
    out = np.zeros(i0.shape, dtype=np.float64)
    for j in range(p + 1):
        out += w[..., j] * padded[i0 + j]
    return out


def spline_eval_1d_batch(padded, m, pts, degree):
    """Row-wise periodic spline evaluation.

    padded has shape (B, M + degree + 1) and pts shape (B, P); row b is
    evaluated with row b's coefficients only, so rows are independent.
    """
    p = int(degree)
    i0, frac = _tap_base(pts, m, p)
    w = bspline_weights(frac, p)
    rows = np.arange(padded.shape[0])[:, None]
    out = np.zeros(i0.shape, dtype=np.float64)
    for j in range(p + 1):
        out += w[..., j] * padded[rows, i0 + j]
    return out


def spline_eval_2d(padded, mx, my, x, y, degree):
    """Evaluate a periodic tensor-product B-spline at scattered points.

    padded has shape (mx + degree + 1, my + degree + 1); axis 0 is x.
    """
    p = int(degree)
    ix, fx = _tap_base(x, mx, p)
    iy, fy = _tap_base(y, my, p)
    wx = bspline_weights(fx, p)
    wy = bspline_weights(fy, p)
    stride = padded.shape[1]
    flat = padded.ravel()
    base = ix * stride + iy
    out = np.zeros(ix.shape, dtype=np.float64)
    for j in range(p + 1):
        acc = np.zeros(ix.shape, dtype=np.float64)
        rowbase = base + j * stride
        for k in range(p + 1):
            acc += wy[..., k] * flat[rowbase + k]
        out += wx[..., j] * acc
    return out


def spline_eval_2d_pair(padded_a, padded_b, mx, my, x, y, degree):
    """Evaluate two same-grid tensor splines at the same points."""
    p = int(degree)
    ix, fx = _tap_base(x, mx, p)
    iy, fy = _tap_base(y, my, p)
    wx = bspline_weights(fx, p)
    wy = bspline_weights(fy, p)
    stride = padded_a.shape[1]
    flat_a = padded_a.ravel()
    flat_b = padded_b.ravel()
    base = ix * stride + iy
    out_a = np.zeros(ix.shape, dtype=np.float64)
    out_b = np.zeros(ix.shape, dtype=np.float64)
    for j in range(p + 1):
        acc_a = np.zeros(ix.shape, dtype=np.float64)
        acc_b = np.zeros(ix.shape, dtype=np.float64)
        rowbase = base + j * stride
        for k in range(p + 1):
            idx = rowbase + k
            wk = wy[..., k]
            acc_a += wk * flat_a[idx]
            acc_b += wk * flat_b[idx]
        out_a += wx[..., j] * acc_a
        out_b += wx[..., j] * acc_b
    return out_a, out_b


def orbit_lift(padded, m, degree, x0, iterations):
    """Iterate the lift x -> x + u(x) of a circle map.

    u is given by halo-padded periodic spline coefficients; returns the
    final lift value after `iterations` steps starting from x0.
    """
    p = int(degree)
    half = (p - 1) // 2
    x = float(x0)
    cl = padded.tolist()
    tab = weight_polys(p).tolist()
    for _ in range(int(iterations)):
        t = (x % 1.0) * m
        base = int(np.floor(t))
        s = t - base - 0.5
        i0 = (base - half) % m
        val = 0.0
        for j in range(p + 1):
            row = tab[j]
            acc = row[p]
            for d in range(p - 1, -1, -1):
                acc = acc * s + row[d]
            val += acc * cl[i0 + j]
        x += val
    return x
