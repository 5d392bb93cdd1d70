"""Factorization certificates: serialization, digesting and verification.

A certificate records an ordered list of factors (commutator pairs of
fiber-preserving loops, plus optional plain fiber pieces or rotations)
whose composition must reproduce the input within the recorded residual.
Loops are stored as sparse Fourier modes (grid-independent replay, floats
at 17 significant digits), h factors additionally carry the displacement
field they are the time-1 flow of, and verification re-flows them.

The verifier composes factors by pushing sample points through each map
pointwise (with pointwise fixed-point inversion), a route disjoint from
the grid-resampling composition the producer uses.
"""

import hashlib
import json

import numpy as np

from .errors import CertificateError
from .fields import PeriodicField, grid_points, wavenumbers
from .groups import VerticalField, distance_to_identity, exp_field
from .loops import LoopSection

SPECTRUM_TRUNCATION = 1e-15


# -- deterministic JSON ------------------------------------------------------

def _format_scalar(x):
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        if not np.isfinite(x):
            raise ValueError("cannot serialize non-finite float")
        return format(float(x), ".17g")
    if isinstance(x, str):
        return json.dumps(x)
    if x is None:
        return "null"
    raise TypeError(f"unsupported scalar {type(x)!r}")


def dumps_canonical(obj, indent=0):
    """JSON with sorted keys and floats at 17 significant digits."""
    pad = " " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = []
        for k in sorted(obj):
            items.append(f"{pad}  {json.dumps(str(k))}: "
                         f"{dumps_canonical(obj[k], indent + 2)}")
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        inner = ", ".join(dumps_canonical(v, indent) for v in obj)
        return "[" + inner + "]"
    return _format_scalar(obj)


def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(dumps_canonical(obj))
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


# -- loop payloads -----------------------------------------------------------

def loop_to_payload(loop):
    """Sparse spectral payload of a loop's displacement array."""
    rows = loop.displacements
    nb, nf = rows.shape
    spec = np.fft.fft2(rows) / rows.size
    mags = np.abs(spec)
    peak = mags.max()
    modes = []
    if peak > 0.0:
        kb = wavenumbers(nb).astype(int)
        kf = wavenumbers(nf).astype(int)
        keep = np.argwhere(mags > SPECTRUM_TRUNCATION * peak)
        order = np.lexsort((keep[:, 1], keep[:, 0]))
        for i, j in keep[order]:
            c = spec[i, j]
            modes.append([int(kb[i]), int(kf[j]), float(c.real), float(c.imag)])
    return {"base": nb, "fiber": nf, "modes": modes}


def loop_from_payload(payload):
    nb = payload["base"]
    nf = payload["fiber"]
    spec = np.zeros((nb, nf), dtype=complex)
    for kb, kf, re, im in payload["modes"]:
        spec[int(kb) % nb, int(kf) % nf] = re + 1j * im
    rows = np.fft.ifft2(spec).real * spec.size
    return LoopSection(rows, copy=False)


def input_digest(f):
    h = hashlib.sha256()
    h.update(f.kind.encode())
    h.update(str(f.grid_size).encode())
    for d in f.displacements():
        h.update(np.ascontiguousarray(d.values).tobytes())
    return "sha256:" + h.hexdigest()


# -- pointwise application of factors (verifier route) -----------------------

def _loop_field(payload, axis):
    """2d displacement field of the fiber-preserving map the loop encodes."""
    loop = loop_from_payload(payload)
    vals = loop.displacements if axis == 1 else loop.displacements.T
    return PeriodicField(vals, copy=False)


class _PointwiseMap:
    """Applies a fiber-preserving loop map and its inverse at points."""

    def __init__(self, payload, axis):
        self.axis = axis
        self.field = _loop_field(payload, axis)

    def forward(self, pts):
        out = pts.copy()
        d = self.field.evaluate(pts, fast=True)
        out[:, 1 if self.axis == 1 else 0] += d
        return out

    def backward(self, pts, tol=1e-13, max_iterations=200):
        moving = 1 if self.axis == 1 else 0
        d = np.zeros(len(pts))
        q = pts.copy()
        for _ in range(max_iterations):
            q[:, moving] = pts[:, moving] + d
            target = -self.field.evaluate(q, fast=True)
            step = np.abs(target - d).max()
            d = target
            if step <= tol:
                break
        else:
            raise CertificateError("pointwise inversion of a factor stalled")
        out = pts.copy()
        out[:, moving] += d
        return out


def _apply_factor(factor, pts):
    kind = factor["kind"]
    if kind == "commutator":
        axis = factor["axis"]
        g = _PointwiseMap(factor["g"], axis)
        h = _PointwiseMap(factor["h"]["payload"], axis)
        return g.forward(h.forward(g.backward(h.backward(pts))))
    if kind == "fiber":
        return _PointwiseMap(factor["payload"], factor["axis"]).forward(pts)
    if kind == "rotation":
        return pts + np.asarray(factor["shift"], dtype=np.float64)[None, :]
    raise CertificateError(f"unknown factor kind {kind!r}")


def wrap_distance(a, b):
    d = np.abs(a - b) % 1.0
    return np.minimum(d, 1.0 - d)


def residual_sample_points(grid):
    """The grid plus a half-cell-shifted copy: the sample set on which both
    the producer and the verifier measure replay residuals."""
    xs = grid_points(grid)
    xx, yy = np.meshgrid(xs, xs, indexing="ij")
    base = np.stack([xx.ravel(), yy.ravel()], axis=1)
    shifted = (base + 0.5 / grid) % 1.0
    return np.concatenate([base, shifted], axis=0)


def replay_certificate(cert, pts):
    """Push points through every factor, outermost factor first in the
    stored list: the composite is factors[0] o factors[1] o ..."""
    out = pts.copy()
    for factor in reversed(cert["factors"]):
        out = _apply_factor(factor, out)
    return out


def verify_certificate(cert, f, tol=None):
    """Check every certificate invariant against the input diffeomorphism.

    Returns a report dict with pass/fail per check and measured residuals.
    The composition here pushes sample points through the factors one map
    at a time (pointwise inversion included), independent of the grid
    composition that produced the certificate.
    """
    checks = []
    if not isinstance(cert, dict) or "factors" not in cert:
        raise CertificateError("malformed certificate: missing factor list")
    try:
        grid = cert["input"]["grid"]
        total_residual = cert["total_residual"]
        factors = cert["factors"]
    except KeyError as exc:
        raise CertificateError(f"malformed certificate: missing {exc}") from exc

    def record(name, passed, detail):
        checks.append({"check": name, "passed": bool(passed), "detail": detail})

    record("grid-matches", grid == f.grid_size,
           f"certificate grid {grid}, input grid {f.grid_size}")
    digest = input_digest(f)
    record("input-digest", digest == cert["input"]["digest"],
           f"recomputed {digest[:23]}...")

    # re-flow every h from its recorded generator field
    flow_tol = cert.get("flow_tolerance", 1e-9)
    worst_flow = 0.0
    bound = cert.get("neighborhood_bound")
    worst_h_dist = 0.0
    for factor in factors:
        if factor["kind"] != "commutator":
            continue
        h = factor["h"]
        stored = loop_from_payload(h["payload"])
        gens = loop_from_payload(h["generator"])
        axis = factor["axis"]
        gen_field = PeriodicField(
            gens.displacements if axis == 1 else gens.displacements.T)
        reflowed = exp_field(VerticalField(axis, gen_field),
                             steps=h["flow_steps"], validate="none",
                             field_bound=None)
        stored_vals = stored.displacements if axis == 1 else stored.displacements.T
        worst_flow = max(worst_flow,
                         float(np.abs(reflowed.displacement.values - stored_vals).max()))
        if bound is not None:
            worst_h_dist = max(worst_h_dist, distance_to_identity(
                reflowed, 0))
    record("h-factors-are-exponentials", worst_flow <= flow_tol,
           f"max re-flow deviation {worst_flow:.3e} (tol {flow_tol:.1e})")
    if bound is not None:
        record("h-factors-near-identity", worst_h_dist <= bound,
               f"max h distance {worst_h_dist:.3e} (bound {bound})")

    # replay on the grid plus a half-cell-shifted grid
    pts = residual_sample_points(f.grid_size)
    replayed = replay_certificate(cert, pts)
    expected = f(pts, fast=True)
    residual = float(wrap_distance(replayed, expected).max())
    record("replay-residual", residual <= total_residual,
           f"measured {residual:.3e} vs recorded bound {total_residual:.3e}")
    if tol is not None:
        record("replay-within-tol", residual <= tol,
               f"measured {residual:.3e} vs requested {tol:.1e}")

    count = sum(1 for fa in factors if fa["kind"] == "commutator")
    record("commutator-count-recorded", count == cert["commutator_count"],
           f"counted {count}")
    if cert.get("status") == "within-bound":
        record("count-within-bound", count <= cert["bound"]["value"],
               f"{count} <= {cert['bound']['value']}")

    passed = all(c["passed"] for c in checks)
    return {"passed": passed, "residual": residual, "checks": checks}
