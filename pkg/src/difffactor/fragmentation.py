"""Bump-function fragmentation of loops and chart-localized commutator data.

fragment() writes a loop of circle maps as an ordered product of pieces,
each supported in one chart of a cover of the base circle: multiplying the
displacement by the chart bump keeps the piece inside the group (the
displacement chart has convex image), the running remainder is peeled off
chart by chart, and the partial products agree with the input on the
growing union of chart cores.  Support containment is structural: rows
where the bump vanishes are exactly zero.

localize_commutator_data() turns fiber-level commutator data (Y_j, S_j)
into chart-local data: h^j(x) = exp(mu(x) Y_j) equals the identity outside
the localization bump and the constant exp(Y_j) on its plateau, so
commutators built from it never leak outside the chart.
"""

from dataclasses import dataclass

import numpy as np

from .errors import BasinError, InvariantViolation
from .fields import PeriodicField, grid_points
from .groups import CircleDiffeo, exp_field
from .loops import LoopSection, RowField, compose_rows, invert_rows

FRAGMENT_BASIN = 0.05


def smoothstep_poly7(t):
    """Degree-7 polynomial step: 0 to 1 on [0, 1] with three flat derivatives."""
    t = np.clip(t, 0.0, 1.0)
    return t ** 4 * (35.0 - 84.0 * t + 70.0 * t * t - 20.0 * t ** 3)


def smoothstep_exp(t):
    """C-infinity step built from exp(-1/t)."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0.0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
        b = np.where(t < 1.0, np.exp(-1.0 / np.maximum(1.0 - t, 1e-300)), 0.0)
    return a / (a + b)


PROFILES = {"poly7": smoothstep_poly7, "smooth": smoothstep_exp}


class Bump:
    """Bump function on the circle: 0 outside `support`, 1 on `core`.

    Arcs are (lo, hi) pairs with hi - lo < 1, taken mod 1; core must sit
    strictly inside support.  Values rise along [support.lo, core.lo] and
    fall along [core.hi, support.hi] following the chosen step profile.
    """

    def __init__(self, support, core, profile="poly7"):
        slo, shi = float(support[0]), float(support[1])
        clo, chi = float(core[0]), float(core[1])
        if not (shi - slo < 1.0 and chi - clo < 1.0):
            raise ValueError("arcs must be shorter than the full circle")
        if not (slo < clo <= chi < shi):
            raise ValueError("core must lie strictly inside the support arc")
        self.support = (slo, shi)
        self.core = (clo, chi)
        self.profile = profile
        self._step = PROFILES[profile]

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        slo, shi = self.support
        clo, chi = self.core
        t = (x - slo) % 1.0
        width = shi - slo
        rise = clo - slo
        fall_start = chi - slo
        fall = shi - chi
        out = np.zeros_like(t)
        inside = t < width
        ti = t[inside]
        vals = np.ones_like(ti)
        mask_rise = ti < rise
        vals[mask_rise] = self._step(ti[mask_rise] / rise)
        mask_fall = ti > fall_start
        vals[mask_fall] = self._step((width - ti[mask_fall]) / fall)
        out[inside] = vals
        return out

    def contains_support(self, x):
        """Membership of x in the closed support arc."""
        slo, shi = self.support
        return (np.asarray(x) - slo) % 1.0 <= (shi - slo)

    def in_core(self, x):
        clo, chi = self.core
        return (np.asarray(x) - clo) % 1.0 <= (chi - clo)


@dataclass
class Chart:
    """One chart of the base cover: bump support V and plateau core U'."""
    support: tuple
    core: tuple


class ChartCover:
    """Cover of the base circle by chart bumps whose cores still cover.

    Each chart carries the fragmentation bump lambda_i (support V_i,
    plateau U_i') and a wider localization bump mu_i whose plateau covers
    the closure of V_i, used to cut commutator data down to the chart.
    """

    def __init__(self, charts, profile="poly7", localization_margin=None):
        if profile not in PROFILES:
            raise ValueError(f"unknown profile {profile!r}")
        self.charts = [c if isinstance(c, Chart) else Chart(*c) for c in charts]
        self.profile = profile
        self.bumps = [Bump(c.support, c.core, profile) for c in self.charts]
        margins = []
        for c in self.charts:
            m = localization_margin
            if m is None:
                m = 0.5 * min(c.core[0] - c.support[0], c.support[1] - c.core[1])
            margins.append(m)
        self.localization_bumps = [
            Bump((c.support[0] - m, c.support[1] + m),
                 (c.support[0] - 0.5 * m, c.support[1] + 0.5 * m), profile)
            for c, m in zip(self.charts, margins)]

    def __len__(self):
        return len(self.charts)

    def verify_cores_cover(self, oversample_grid=1024):
        x = grid_points(oversample_grid)
        covered = np.zeros(oversample_grid, dtype=bool)
        for b in self.bumps:
            covered |= b.in_core(x)
        if not covered.all():
            gap = x[~covered][0]
            raise InvariantViolation(
                f"chart cores fail to cover the base circle near x = {gap:.4f}")

    @classmethod
    def two_arc(cls, profile="poly7"):
        """Two slightly-more-than-half arcs with 10% overlap margins."""
        return cls([Chart(support=(-0.075, 0.625), core=(0.0, 0.55)),
                    Chart(support=(0.425, 1.125), core=(0.5, 1.05))],
                   profile=profile)

    @classmethod
    def global_chart(cls):
        """Trivial cover: one bump identically 1 (support formally the
        whole circle minus a point is not needed; fragmentation treats
        this case as a copy)."""
        return cls([Chart(support=(-0.26, 1.01), core=(-0.005, 1.0))])

    def to_payload(self):
        return {"charts": [{"V": list(c.support), "U": list(c.core)}
                           for c in self.charts],
                "profile": self.profile}

    @classmethod
    def from_payload(cls, payload):
        charts = [Chart(support=tuple(c["V"]), core=tuple(c["U"]))
                  for c in payload["charts"]]
        return cls(charts, profile=payload.get("profile", "poly7"))


def fragment(section, cover):
    """Split a loop into chart-supported pieces with ordered product equal
    to the input.

    Returns a list of LoopSections, one per chart; piece i is identically
    the identity (exact zeros) outside the closure of chart i's bump
    support and equals the running remainder on the chart core.
    """
    cover.verify_cores_cover()
    rows = section.displacements
    per_fiber = np.abs(rows).max(axis=1)
    if per_fiber.max() > FRAGMENT_BASIN:
        worst = int(np.argmax(per_fiber))
        raise BasinError(
            f"fiber at x = {worst / section.base_size:.4f} has C0 distance "
            f"{per_fiber[worst]:.4f}, outside the fragmentation basin "
            f"{FRAGMENT_BASIN}")
    x_base = grid_points(section.base_size)
    x_fiber = grid_points(section.fiber_size)
    remainder = RowField(rows)
    pieces = []
    for bump in cover.bumps:
        lam = bump(x_base)
        piece_rows = lam[:, None] * remainder.rows
        pieces.append(LoopSection(piece_rows))
        piece_inv = invert_rows(RowField(piece_rows, copy=False), x_fiber)
        remainder = compose_rows(piece_inv, remainder, x_fiber)
    return pieces


@dataclass
class FiberWitness:
    """Commutator data of the fiber group: generators Y_j (circle vector
    fields, as 1d PeriodicFields) and a solver g -> [g_1, ..., g_N] with
    [g_1, exp(Y_1)] ... [g_N, exp(Y_N)] = g for g near the identity."""
    generators: list
    solve: callable

    def __len__(self):
        return len(self.generators)


@dataclass
class LocalizedWitness:
    h_loops: list          # LoopSections x -> exp(mu(x) Y_j)
    generator_loops: list  # (B, fiber) arrays of mu(x) Y_j samples
    bump: Bump
    witness: FiberWitness

    def apply(self, piece):
        """Fiberwise solver maps S^j = (S_j)_*: identity rows stay exact."""
        rows = piece.displacements
        nb, nf = rows.shape
        out = [np.zeros((nb, nf)) for _ in range(len(self.witness))]
        for b in range(nb):
            if not rows[b].any():
                continue
            if not self.bump.in_core(b / nb):
                raise InvariantViolation(
                    f"piece is not supported where the localization bump is "
                    f"flat: moving fiber at x = {b / nb:.4f}")
            sols = self.witness.solve(CircleDiffeo(
                PeriodicField(rows[b]), validate=False))
            for j, s in enumerate(sols):
                out[j][b] = s.u.values
        return [LoopSection(o, copy=False) for o in out]


def localize_commutator_data(witness, mu, base_size, flow_steps=16):
    """Cut fiber-level commutator data down to a chart.

    h^j(x) = exp(mu(x) Y_j): exactly the identity where mu vanishes, the
    constant exp(Y_j) on the plateau.  mu must be a Bump whose plateau
    contains the support of any piece the data will be applied to.
    """
    x_base = grid_points(base_size)
    mu_vals = mu(x_base)
    h_loops = []
    gen_loops = []
    plateau_cache = {}
    for j, gen in enumerate(witness.generators):
        nf = gen.grid_size
        rows = np.zeros((base_size, nf))
        gens = np.zeros((base_size, nf))
        for b in range(base_size):
            m = mu_vals[b]
            if m == 0.0:
                continue
            gens[b] = m * gen.values
            key = (j, m)
            if key not in plateau_cache:
                plateau_cache[key] = exp_field(
                    m * gen, steps=flow_steps, validate="none",
                    field_bound=None).u.values
            rows[b] = plateau_cache[key]
        h_loops.append(LoopSection(rows, copy=False))
        gen_loops.append(gens)
    return LocalizedWitness(h_loops=h_loops, generator_loops=gen_loops,
                            bump=mu, witness=witness)
