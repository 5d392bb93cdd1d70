"""Commutator factorization of near-identity circle diffeomorphisms.

Writes f = [S, R_a] o R_b with R_a a fixed Diophantine rotation, S a circle
diffeomorphism and R_b a rotation remainder.  The Newton linearization of
S -> [S, R_a] at the identity is the adjoint difference id - Ad_{R_a},
whose Fourier multiplier has the small divisors e^{2 pi i k a} - 1; each
iteration solves the cohomological equation on the current residual and
absorbs the mode-0 obstruction into the rotation remainder.

factor_loop applies the same scheme fiber-by-fiber to a loop of circle
maps; rows are solved with row-local operations and frozen individually
once converged, so the result is identical to independent per-fiber solves.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import BasinError, ConvergenceError, SmallDivisorError
from .fields import PeriodicField, grid_points, wavenumbers
from .groups import CircleDiffeo, compose, distance_to_identity, invert
from .loops import LoopSection, RowField, compose_rows, exp_rows, invert_rows

GOLDEN_MEAN = (np.sqrt(5.0) - 1.0) / 2.0
DEFAULT_BASIN = 0.05


def continued_fraction(alpha, terms=40):
    """Continued-fraction coefficients and convergents p/q of alpha."""
    coeffs = []
    convergents = []
    p_prev, q_prev = 1, 0
    p, q = int(np.floor(alpha)), 1
    x = float(alpha)
    for _ in range(terms):
        a = int(np.floor(x))
        coeffs.append(a)
        if coeffs[1:]:
            p, p_prev = a * p + p_prev, p
            q, q_prev = a * q + q_prev, q
        convergents.append((p, q))
        frac = x - a
        if frac < 1e-15 or q > 10 ** 12:
            break
        x = 1.0 / frac
    return coeffs, convergents


class DiophantineRotation:
    """A rotation angle with a certified small-divisor floor.

    The certificate records min |e^{2 pi i k alpha} - 1| over 1 <= |k| <=
    max_mode together with the constant c = min k * divisor(k); both must
    be positive for the cohomological solver to accept the angle.
    """

    __slots__ = ("alpha", "max_mode", "coefficients", "convergents",
                 "min_divisor", "constant", "_divisors")

    def __init__(self, alpha, max_mode):
        alpha = float(alpha)
        if not 0.0 < alpha < 1.0:
            raise ValueError("rotation angle must lie in (0, 1)")
        self.alpha = alpha
        self.max_mode = int(max_mode)
        self.coefficients, self.convergents = continued_fraction(alpha)
        k = np.arange(1, self.max_mode + 1)
        div = np.abs(np.exp(2j * np.pi * k * alpha) - 1.0)
        self.min_divisor = float(div.min())
        self.constant = float((k * div).min())
        if self.min_divisor <= 0.0:
            raise SmallDivisorError(
                f"angle {alpha} has a vanishing divisor within |k| <= {max_mode}; "
                "not certifiable as Diophantine on this mode range",
                mode=int(k[np.argmin(div)]))
        self._divisors = div

    @classmethod
    def golden(cls, max_mode=512):
        return cls(GOLDEN_MEAN, max_mode)

    def divisor(self, k):
        """|e^{2 pi i k alpha} - 1| for 1 <= |k| <= max_mode."""
        k = abs(int(k))
        if not 1 <= k <= self.max_mode:
            raise ValueError(f"mode {k} outside the certified range")
        return float(self._divisors[k - 1])


def solve_cohomological(psi, rotation):
    """Solve s o R_alpha - s = psi - mean(psi) spectrally.

    Returns (s, mean(psi)); s has zero mean.  The solution divides each
    mode by e^{2 pi i k alpha} - 1, so the rotation certificate must cover
    every active mode of psi.
    """
    if psi.dimension != 1:
        raise ValueError("cohomological solve expects a 1d field")
    out, means = _solve_rows(RowField(psi.values[None, :]), rotation)
    return PeriodicField(out.rows[0], copy=False), float(means[0])


def _solve_rows(psi, rotation):
    n = psi.grid_size
    k = wavenumbers(n)
    if rotation.max_mode < n // 2 - 1:
        spec = psi.spectra
        mags = np.abs(spec).max(axis=0)
        active = np.nonzero(mags > 1e-14 * max(1.0, mags.max()))[0]
        beyond = active[np.abs(k[active]) > rotation.max_mode]
        if beyond.size:
            mode = int(k[beyond[np.argmax(np.abs(k[beyond]))]])
            raise SmallDivisorError(
                f"mode {mode} of the right-hand side outside the certified "
                f"range |k| <= {rotation.max_mode}", mode=mode)
    mult = np.zeros(n, dtype=complex)
    nz = k != 0
    mult[nz] = 1.0 / (np.exp(2j * np.pi * k[nz] * rotation.alpha) - 1.0)
    mult[n // 2] = 0.0
    # modes beyond the certificate were checked to be negligible above;
    # zero them rather than divide by uncertified divisors
    mult[np.abs(k) > rotation.max_mode] = 0.0
    spec = psi.spectra * mult[None, :]
    means = psi.means()
    return RowField(np.fft.ifft(spec, axis=1).real * n, copy=False), means


@dataclass
class FactorOptions:
    tolerance: float = 1e-9
    max_iterations: int = 60
    basin: float = DEFAULT_BASIN
    flow_steps: int = 4
    base_filter: bool = True       # low-pass loops across the base when safe


@dataclass
class CircleCommutatorFactorization:
    S: CircleDiffeo
    alpha: float
    beta: float
    residual: float
    iterations: int
    history: list = field(default_factory=list)

    def reconstruct(self):
        """Compose [S, R_alpha] o R_beta on the grid of S."""
        n = self.S.grid_size
        ra = CircleDiffeo.rotation(self.alpha, n)
        comm = compose(compose(compose(self.S, ra), invert(self.S)),
                       CircleDiffeo.rotation(-self.alpha, n))
        return compose(comm, CircleDiffeo.rotation(self.beta, n))


@dataclass
class LoopFactorization:
    S_loop: LoopSection
    beta: PeriodicField            # rotation remainder per base point
    residuals: np.ndarray
    iterations: int
    filtered: bool
    alpha: float


class _RowSolver:
    """Shared Newton/KAM engine; one row per fiber."""

    def __init__(self, rows, rotation, opts):
        self.U = RowField(rows)
        self.rot = rotation
        self.opts = opts
        self.B, self.n = self.U.rows.shape
        self.x = grid_points(self.n)

    def run(self):
        opts = self.opts
        S = RowField.zero(self.B, self.n)
        Sinv = RowField.zero(self.B, self.n)
        beta = np.zeros(self.B)
        active = np.ones(self.B, dtype=bool)
        residuals = np.full(self.B, np.inf)
        cinv_warm = None
        history = []
        for it in range(opts.max_iterations + 1):
            C = self._reconstruct(S, Sinv, beta)
            cinv_warm = invert_rows(C, self.x, initial=cinv_warm)
            G = compose_rows(self.U, cinv_warm, self.x)
            res = G.sup_per_row()
            history.append(float(res.max()))
            newly = res <= 0.8 * opts.tolerance
            residuals = np.where(newly, res, residuals)
            active = active & ~newly
            if not active.any():
                residuals = np.where(np.isinf(residuals), res, residuals)
                return S, beta, residuals, it, history
            if it == opts.max_iterations:
                worst = int(np.argmax(np.where(active, res, -np.inf)))
                raise ConvergenceError(
                    f"commutator factorization stalled at fiber x = "
                    f"{worst / self.B:.4f} with residual {res[worst]:.3e}",
                    history=history)
            m = G.means()
            psi0 = RowField(G.rows - m[:, None], copy=False)
            sigma, _ = _solve_rows(psi0.shifted(self.rot.alpha), self.rot)
            flow = exp_rows(sigma, self.x, steps=opts.flow_steps)
            S_new = compose_rows(flow, S, self.x)
            rows = np.array(S.rows)
            rows[active] = S_new.rows[active]
            S = RowField(rows, copy=False)
            Sinv = invert_rows(S, self.x, initial=Sinv)
            beta = beta + np.where(active, m, 0.0)

    def _reconstruct(self, S, Sinv, beta):
        """Rows of [S, R_a] o R_b:  S o R_a o S^{-1} o R_{-a} o R_b."""
        a = self.rot.alpha
        A = RowField(a + S.shifted(a).rows, copy=False)          # S o R_a
        B = compose_rows(A, Sinv, self.x)                        # ... o S^{-1}
        C0 = RowField(-a + B.shifted(-a).rows, copy=False)       # ... o R_{-a}
        return RowField(beta[:, None] + C0.shifted(beta).rows, copy=False)

    def residual_of(self, S, Sinv, beta):
        C = self._reconstruct(S, Sinv, beta)
        cinv = invert_rows(C, self.x)
        return compose_rows(self.U, cinv, self.x).sup_per_row()


def factor_circle_diffeo(f, rotation, opts=None):
    """Factor one circle diffeomorphism as [S, R_alpha] o R_beta."""
    opts = opts or FactorOptions()
    d1 = distance_to_identity(f, 1)
    if d1 > opts.basin:
        raise BasinError(
            f"C1 distance {d1:.4f} exceeds the factorization basin {opts.basin}")
    solver = _RowSolver(f.u.values[None, :], rotation, opts)
    S, beta, residuals, iterations, history = solver.run()
    return CircleCommutatorFactorization(
        S=CircleDiffeo(PeriodicField(S.rows[0]), validate=False),
        alpha=rotation.alpha,
        beta=float(beta[0]),
        residual=float(residuals[0]),
        iterations=iterations,
        history=history)


def factor_loop(F, rotation, opts=None):
    """Fiberwise commutator factorization of a loop of circle maps.

    Fibers are solved independently (rows freeze once converged).  When
    every fiber moves, the S and beta loops are low-pass filtered below a
    quarter of the base Nyquist frequency to suppress fiber-to-fiber solver
    noise, and the residuals are re-verified (reverting if filtering ever
    hurt them).  Loops containing exactly-identity fibers, such as pieces
    supported in a chart, are never filtered: filtering across the base
    would smear their support.
    """
    opts = opts or FactorOptions()
    rows = F.displacements
    rf = RowField(rows)
    dk = 2j * np.pi * wavenumbers(F.fiber_size)
    dk[F.fiber_size // 2] = 0.0
    derivs = np.fft.ifft(rf.spectra * dk[None, :], axis=1).real * F.fiber_size
    fiber_c1 = np.maximum(np.abs(rows).max(axis=1), np.abs(derivs).max(axis=1))
    if fiber_c1.max() > opts.basin:
        worst = int(np.argmax(fiber_c1))
        raise BasinError(
            f"fiber at x = {worst / F.base_size:.4f} has C1 distance "
            f"{fiber_c1[worst]:.4f}, outside the basin {opts.basin}")
    solver = _RowSolver(rows, rotation, opts)
    S, beta, residuals, iterations, history = solver.run()

    filtered = False
    zero_rows = ~rows.any(axis=1)
    if opts.base_filter and not zero_rows.any() and F.base_size >= 8:
        cutoff = F.base_size // 8      # a quarter of the Nyquist frequency
        S_f = LoopSection(S.rows).lowpass_base(cutoff)
        spec = np.fft.fft(beta) / beta.size
        k = np.abs(wavenumbers(beta.size))
        spec[k > cutoff] = 0.0
        beta_f = np.fft.ifft(spec).real * beta.size
        Sf_rows = RowField(S_f.displacements)
        res_f = solver.residual_of(Sf_rows, invert_rows(Sf_rows, solver.x), beta_f)
        if res_f.max() <= opts.tolerance:
            S, beta, residuals, filtered = Sf_rows, beta_f, res_f, True

    return LoopFactorization(
        S_loop=LoopSection(S.rows),
        beta=PeriodicField(beta),
        residuals=residuals,
        iterations=iterations,
        filtered=filtered,
        alpha=rotation.alpha)
