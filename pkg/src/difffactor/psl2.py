"""Rotations as products of two commutators in PSL(2, R).

The elliptic one-parameter subgroup of PSL(2, R) acts on the projective
circle RP^1 = {[cos t : sin t]} as rigid rotation; identifying [cos t :
sin t] with x = t/pi mod 1 embeds every rotation R_b as the elliptic
element with angle pi b.  Because sl(2, R) is split semisimple, two
commutators suffice: with h_1 = exp(eps H), H the regular Cartan element,
and h_2 = exp(eps E), E the simple-root vector, the map
(g_1, g_2) -> [g_1, h_1][g_2, h_2] is a submersion at the identity, and a
minimum-norm Newton iteration solves [g_1, h_1][g_2, h_2] = R_b for
near-identity g_i.  The Moebius action converts every factor into a circle
diffeomorphism, which is how rotation loops get absorbed into commutators.
"""

from dataclasses import dataclass

import numpy as np

from .errors import BasinError, ConvergenceError
from .fields import PeriodicField, grid_points
from .groups import CircleDiffeo
from .loops import LoopSection

H_MAT = np.array([[1.0, 0.0], [0.0, -1.0]])
E_MAT = np.array([[0.0, 1.0], [0.0, 0.0]])
F_MAT = np.array([[0.0, 0.0], [1.0, 0.0]])
ROTATION_GENERATOR = np.array([[0.0, -1.0], [1.0, 0.0]])

DEFAULT_EPS = 0.1
DEFAULT_BASIN = 0.05


def exp_sl2(X):
    """Closed-form exponential of a traceless 2x2 matrix."""
    X = np.asarray(X, dtype=np.float64)
    mu2 = X[0, 0] * X[0, 0] + X[0, 1] * X[1, 0]
    if mu2 > 1e-12:
        mu = np.sqrt(mu2)
        return np.cosh(mu) * np.eye(2) + (np.sinh(mu) / mu) * X
    if mu2 < -1e-12:
        om = np.sqrt(-mu2)
        return np.cos(om) * np.eye(2) + (np.sin(om) / om) * X
    # series: cosh(mu) ~ 1 + mu2/2, sinh(mu)/mu ~ 1 + mu2/6
    return (1.0 + mu2 / 2.0) * np.eye(2) + (1.0 + mu2 / 6.0) * X


def log_psl2(M):
    """Traceless logarithm of a unimodular matrix near +-identity.

    Sign-normalizes first (PSL(2, R) identifies M and -M), then scales the
    traceless part by the angle/sinh factor determined by the trace.
    """
    M = np.asarray(M, dtype=np.float64)
    tr = M[0, 0] + M[1, 1]
    if tr < 0:
        M = -M
        tr = -tr
    tau = tr / 2.0
    X0 = M - tau * np.eye(2)
    if abs(tau - 1.0) < 1e-9:
        factor = 1.0 - (tau - 1.0) / 3.0
    elif tau > 1.0:
        mu = np.arccosh(tau)
        factor = mu / np.sinh(mu)
    else:
        th = np.arccos(np.clip(tau, -1.0, 1.0))
        factor = th / np.sin(th)
    return factor * X0


def sl2_coords(X):
    """Coordinates (h, e, f) of a traceless matrix in the (H, E, F) basis."""
    return np.array([X[0, 0], X[0, 1], X[1, 0]])


def inv2(M):
    return np.array([[M[1, 1], -M[0, 1]], [-M[1, 0], M[0, 0]]])


def rotation_matrix(beta):
    """The elliptic element acting on the projective circle as R_beta."""
    t = np.pi * beta
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, -s], [s, c]])


def adjoint_matrix(g):
    """Ad_g on sl(2, R) in the (H, E, F) basis."""
    ginv = inv2(g)
    cols = [sl2_coords(g @ B @ ginv) for B in (H_MAT, E_MAT, F_MAT)]
    return np.stack(cols, axis=1)


def _second_kind(x):
    """Exponential coordinates of the second kind on PSL(2, R)."""
    return (exp_sl2(x[0] * H_MAT) @ exp_sl2(x[1] * E_MAT) @ exp_sl2(x[2] * F_MAT))


@dataclass
class Psl2Factorization:
    pairs: tuple            # ((g1, h1), (g2, h2)) as 2x2 matrices
    coordinates: np.ndarray  # the 6 Newton unknowns
    residual: float
    iterations: int
    eps: float
    beta: float

    def product(self):
        (g1, h1), (g2, h2) = self.pairs
        return (g1 @ h1 @ inv2(g1) @ inv2(h1)) @ (g2 @ h2 @ inv2(g2) @ inv2(h2))


def transversality_rank(eps):
    """Rank of (X1, X2) -> (id - Ad_{h1}) X1 + (id - Ad_{h2}) X2 at identity."""
    h1 = exp_sl2(eps * H_MAT)
    h2 = exp_sl2(eps * E_MAT)
    D = np.concatenate([np.eye(3) - adjoint_matrix(h1),
                        np.eye(3) - adjoint_matrix(h2)], axis=1)
    s = np.linalg.svd(D, compute_uv=False)
    return int(np.sum(s > 1e-9 * s[0])), D


def psl2_rotation_commutators(beta, eps=DEFAULT_EPS, tol=1e-12, basin=DEFAULT_BASIN,
                              warm=None, max_iterations=60):
    """Write the rotation R_beta as [g1, exp(eps H)][g2, exp(eps E)].

    Newton iterates on the 6 coordinates of (g1, g2) with minimum-norm
    steps; the derivative at the identity is checked to have full rank 3
    (it degenerates only for eps = 0).  beta = 0 returns the identity pair
    exactly.  An optional warm start continues a nearby solution, which is
    what keeps loops of solutions continuous.
    """
    beta = float(beta)
    if abs(beta) > basin:
        raise BasinError(f"|beta| = {abs(beta):.4f} outside the basin {basin}")
    if eps <= 0:
        raise ValueError("eps must be positive")
    h1 = exp_sl2(eps * H_MAT)
    h2 = exp_sl2(eps * E_MAT)
    if beta == 0.0 and warm is None:
        pairs = ((np.eye(2), h1), (np.eye(2), h2))
        return Psl2Factorization(pairs, np.zeros(6), 0.0, 0, eps, beta)
    rank, _ = transversality_rank(eps)
    if rank < 3:
        raise ValueError(
            f"derivative of the commutator map is rank {rank} < 3 at eps = "
            f"{eps}; increase the neighborhood scale")
    target_inv = rotation_matrix(-beta)
    h1i = inv2(h1)
    h2i = inv2(h2)

    def kappa(x):
        g1 = _second_kind(x[:3])
        g2 = _second_kind(x[3:])
        return (g1 @ h1 @ inv2(g1) @ h1i) @ (g2 @ h2 @ inv2(g2) @ h2i)

    def resid(x):
        return sl2_coords(log_psl2(kappa(x) @ target_inv))

    x = np.zeros(6) if warm is None else np.array(warm, dtype=np.float64)
    step = 1e-7
    for it in range(max_iterations):
        r = resid(x)
        rn = np.abs(r).max()
        if rn <= tol:
            g1 = _second_kind(x[:3])
            g2 = _second_kind(x[3:])
            mat_res = float(np.abs(kappa(x) - rotation_matrix(beta)).max())
            return Psl2Factorization(((g1, h1), (g2, h2)), x, mat_res, it, eps, beta)
        J = np.empty((3, 6))
        for j in range(6):
            xp = x.copy()
            xm = x.copy()
            xp[j] += step
            xm[j] -= step
            J[:, j] = (resid(xp) - resid(xm)) / (2 * step)
        x = x - np.linalg.pinv(J) @ r
    raise ConvergenceError(
        f"rotation commutator solve stalled at residual {rn:.3e} for "
        f"beta = {beta}", history=[rn])


# -- Moebius action on the projective circle ---------------------------------

def mobius_circle_map(M, points):
    """Apply the projective action of M to period-1 circle coordinates."""
    t = np.pi * np.asarray(points, dtype=np.float64)
    vx = M[0, 0] * np.cos(t) + M[0, 1] * np.sin(t)
    vy = M[1, 0] * np.cos(t) + M[1, 1] * np.sin(t)
    return np.arctan2(vy, vx) / np.pi % 1.0


def mobius_circle_diffeo(M, grid_size):
    """The circle diffeomorphism induced by a near-identity M in PSL(2,R)."""
    x = grid_points(grid_size)
    raw = mobius_circle_map(M, x) - x
    disp = (raw + 0.5) % 1.0 - 0.5
    return CircleDiffeo(PeriodicField(disp, copy=False))


def mobius_vector_field(X, grid_size):
    """Circle vector field generating the projective flow of exp(tX).

    For X = [[a, b], [c, -a]] the angular velocity at angle t is
    c cos^2 t - b sin^2 t - a sin 2t; in period-1 coordinates divide by pi.
    """
    x = grid_points(grid_size)
    t = np.pi * x
    a, b, c = X[0, 0], X[0, 1], X[1, 0]
    vals = (c * np.cos(t) ** 2 - b * np.sin(t) ** 2 - a * np.sin(2 * t)) / np.pi
    return PeriodicField(vals, copy=False)


@dataclass
class RotationLoopFactorization:
    g_loops: tuple          # (G1, G2) LoopSections
    h_loops: tuple          # (H1, H2) LoopSections (constant rows here)
    generators: tuple       # (eps*H, eps*E) sl2 matrices behind the h loops
    coordinates: np.ndarray  # per-fiber Newton coordinates (B, 6)
    residuals: np.ndarray
    eps: float


def rotation_loop_commutators(beta, eps=DEFAULT_EPS, fiber_grid=None, tol=1e-12,
                              basin=DEFAULT_BASIN):
    """Absorb a loop of rotations x -> R_beta(x) into two commutator loops.

    Solves fiberwise with the previous fiber's solution as warm start,
    beginning at a fiber with beta = 0 when one exists so that localized
    loops stay exactly identity outside their support.  All PSL(2, R)
    factors are converted to circle diffeomorphisms through the Moebius
    action; the returned loops satisfy [G1(x), H1(x)][G2(x), H2(x)] =
    R_beta(x) fiber by fiber.
    """
    if beta.dimension != 1:
        raise ValueError("expected a 1d field of rotation angles")
    vals = beta.values
    n_base = beta.grid_size
    n_fiber = fiber_grid or n_base
    sup = np.abs(vals).max()
    if sup > basin:
        worst = int(np.argmax(np.abs(vals)))
        raise BasinError(
            f"|beta| = {sup:.4f} at fiber x = {worst / n_base:.4f} outside "
            f"the basin {basin}")
    zero_rows = np.nonzero(vals == 0.0)[0]
    start = int(zero_rows[0]) if zero_rows.size else 0
    order = [(start + i) % n_base for i in range(n_base)]

    coords = np.zeros((n_base, 6))
    residuals = np.zeros(n_base)
    mats = [None] * n_base
    warm = None
    for idx in order:
        b = vals[idx]
        if b == 0.0:
            sol = psl2_rotation_commutators(0.0, eps=eps, tol=tol, basin=basin)
            warm = None
        else:
            sol = psl2_rotation_commutators(b, eps=eps, tol=tol, basin=basin,
                                            warm=warm)
            warm = sol.coordinates
        coords[idx] = sol.coordinates
        residuals[idx] = sol.residual
        mats[idx] = sol.pairs

    x_fiber = grid_points(n_fiber)
    g1_rows = np.zeros((n_base, n_fiber))
    g2_rows = np.zeros((n_base, n_fiber))
    h1 = exp_sl2(eps * H_MAT)
    h2 = exp_sl2(eps * E_MAT)
    h1_disp = mobius_circle_diffeo(h1, n_fiber).u.values
    h2_disp = mobius_circle_diffeo(h2, n_fiber).u.values
    for idx in range(n_base):
        (g1, _), (g2, _) = mats[idx]
        g1_rows[idx] = _mobius_disp(g1, x_fiber)
        g2_rows[idx] = _mobius_disp(g2, x_fiber)
    h1_rows = np.tile(h1_disp[None, :], (n_base, 1))
    h2_rows = np.tile(h2_disp[None, :], (n_base, 1))
    return RotationLoopFactorization(
        g_loops=(LoopSection(g1_rows), LoopSection(g2_rows)),
        h_loops=(LoopSection(h1_rows), LoopSection(h2_rows)),
        generators=(eps * H_MAT, eps * E_MAT),
        coordinates=coords,
        residuals=residuals,
        eps=eps)


def _mobius_disp(M, x):
    raw = mobius_circle_map(M, x) - x
    return (raw + 0.5) % 1.0 - 0.5
