"""Finite-dimensional Lie algebras and the commutator-surjectivity gate.

The invariant computed here is the smallest N such that some tuple
Y = (Y_1, ..., Y_N) makes K_Y(X_1, ..., X_N) = sum [X_i, Y_i] surjective;
a full-rank K_Y witnesses that products of N commutators reach a whole
neighborhood of the identity in any group with this algebra.  Also checks
the integral identity id - Ad_{exp Y} = -ad_Y o int_0^1 Ad_{exp tY} dt
that transports such witnesses from the algebra to the group level.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

RANK_RTOL = 1e-9


class FiniteLieAlgebra:
    """Structure constants c[i][j][k] with [e_i, e_j] = sum_k c[i,j,k] e_k.

    Optionally carries a faithful matrix representation (one matrix per
    basis element) and distinguished elements for structured surjectivity
    candidates: a regular element of a Cartan subalgebra and a sum of
    simple-root vectors.
    """

    def __init__(self, structure_constants, matrix_rep=None,
                 cartan_regular=None, root_sum=None, name=""):
        c = np.asarray(structure_constants, dtype=np.float64)
        if c.ndim != 3 or len(set(c.shape)) != 1:
            raise ValueError("structure constants must form a (d, d, d) tensor")
        d = c.shape[0]
        anti = np.abs(c + np.swapaxes(c, 0, 1)).max()
        if anti > 1e-12:
            raise ValueError(f"antisymmetry violated by {anti:.3e}")
        jac = np.einsum("ijm,mkl->ijkl", c, c)
        jacobi = jac + np.einsum("jkm,mil->ijkl", c, c) + np.einsum("kim,mjl->ijkl", c, c)
        jmax = np.abs(jacobi).max()
        if jmax > 1e-12:
            raise ValueError(f"Jacobi identity violated by {jmax:.3e}")
        self.structure_constants = c
        self.dimension = d
        self.name = name or f"lie-{d}"
        self.matrix_rep = None
        self._rep_pinv = None
        if matrix_rep is not None:
            rep = np.asarray(matrix_rep, dtype=np.float64)
            if rep.shape[0] != d or rep.ndim != 3 or rep.shape[1] != rep.shape[2]:
                raise ValueError("matrix representation must be d square matrices")
            flat = rep.reshape(d, -1).T
            self._rep_pinv = np.linalg.pinv(flat)
            worst = 0.0
            for i in range(d):
                for j in range(d):
                    comm = rep[i] @ rep[j] - rep[j] @ rep[i]
                    model = np.einsum("k,kab->ab", c[i, j], rep)
                    worst = max(worst, np.abs(comm - model).max())
            if worst > 1e-10:
                raise ValueError(
                    f"matrix representation disagrees with the structure "
                    f"constants by {worst:.3e}")
            self.matrix_rep = rep
        self.cartan_regular = None if cartan_regular is None else \
            np.asarray(cartan_regular, dtype=np.float64)
        self.root_sum = None if root_sum is None else \
            np.asarray(root_sum, dtype=np.float64)

    def bracket(self, X, Y):
        return np.einsum("i,j,ijk->k", X, Y, self.structure_constants)

    def ad_matrix(self, Y):
        """Matrix of ad_Y: X -> [Y, X] in the chosen basis."""
        return np.einsum("i,ijk->kj", Y, self.structure_constants)

    def rep(self, X):
        if self.matrix_rep is None:
            raise ValueError("no matrix representation attached")
        return np.einsum("i,iab->ab", np.asarray(X, dtype=np.float64), self.matrix_rep)

    def coords_from_rep(self, M):
        return self._rep_pinv @ np.asarray(M, dtype=np.float64).ravel()

    def adjoint_operator(self, g):
        """Matrix of X -> g rep(X) g^{-1} in basis coordinates."""
        ginv = np.linalg.inv(g)
        cols = [self.coords_from_rep(g @ R @ ginv) for R in self.matrix_rep]
        return np.stack(cols, axis=1)


# -- built-in algebras -------------------------------------------------------

def abelian(dimension):
    c = np.zeros((dimension, dimension, dimension))
    rep = np.zeros((dimension, dimension, dimension))
    for i in range(dimension):
        rep[i, i, i] = 1.0
    return FiniteLieAlgebra(c, matrix_rep=rep, name=f"abelian:{dimension}")


def sl2():
    """Basis (H, E, F): [H,E] = 2E, [H,F] = -2F, [E,F] = H."""
    c = np.zeros((3, 3, 3))
    c[0, 1, 1] = 2.0
    c[1, 0, 1] = -2.0
    c[0, 2, 2] = -2.0
    c[2, 0, 2] = 2.0
    c[1, 2, 0] = 1.0
    c[2, 1, 0] = -1.0
    rep = np.array([[[1.0, 0.0], [0.0, -1.0]],
                    [[0.0, 1.0], [0.0, 0.0]],
                    [[0.0, 0.0], [1.0, 0.0]]])
    return FiniteLieAlgebra(c, matrix_rep=rep,
                            cartan_regular=[1.0, 0.0, 0.0],
                            root_sum=[0.0, 1.0, 0.0], name="sl2")


def so3():
    """Basis (e1, e2, e3): [e1,e2] = e3 cyclically."""
    c = np.zeros((3, 3, 3))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        c[i, j, k] = 1.0
        c[j, i, k] = -1.0
    rep = np.zeros((3, 3, 3))
    for idx, (i, j, k) in enumerate(((0, 1, 2), (1, 2, 0), (2, 0, 1))):
        rep[idx, j, k] = -1.0
        rep[idx, k, j] = 1.0
    # rep[a] generates rotations about axis a; matches the cyclic brackets
    return FiniteLieAlgebra(c, matrix_rep=rep,
                            cartan_regular=[0.0, 0.0, 1.0],
                            root_sum=[1.0, 0.0, 0.0], name="so3")


def _sl3_basis():
    def e(i, j):
        m = np.zeros((3, 3))
        m[i, j] = 1.0
        return m
    return np.stack([
        e(0, 0) - e(1, 1),        # H1
        e(1, 1) - e(2, 2),        # H2
        e(0, 1), e(1, 2), e(0, 2),  # E12, E23, E13
        e(1, 0), e(2, 1), e(2, 0),  # F21, F32, F31
    ])


def sl3():
    """Traceless 3x3 matrices; structure constants derived from the basis."""
    rep = _sl3_basis()
    d = rep.shape[0]
    flat = rep.reshape(d, -1).T
    pinv = np.linalg.pinv(flat)
    c = np.zeros((d, d, d))
    for i in range(d):
        for j in range(i + 1, d):
            comm = rep[i] @ rep[j] - rep[j] @ rep[i]
            coords = pinv @ comm.ravel()
            coords[np.abs(coords) < 1e-13] = 0.0
            c[i, j] = coords
            c[j, i] = -coords
    cartan = np.zeros(d)
    cartan[0] = 1.0
    cartan[1] = 1.0      # H1 + H2 = diag(1, 0, -1), regular
    rho = np.zeros(d)
    rho[2] = 1.0
    rho[3] = 1.0         # E12 + E23, the simple-root sum
    return FiniteLieAlgebra(c, matrix_rep=rep, cartan_regular=cartan,
                            root_sum=rho, name="sl3")


BUILTIN_ALGEBRAS = {"sl2": sl2, "so3": so3, "sl3": sl3}


# -- the K_Y operator and the surjectivity search ----------------------------

def k_y_operator(alg, elements):
    """Matrix of K_Y(X_1,...,X_N) = sum [X_i, Y_i] on stacked arguments.

    Returns the d x (N d) block matrix [-ad_{Y_1} | ... | -ad_{Y_N}];
    surjectivity of K_Y is full row rank d.
    """
    blocks = []
    for Y in elements:
        Y = np.asarray(Y, dtype=np.float64)
        if Y.shape != (alg.dimension,):
            raise ValueError(
                f"element of dimension {Y.shape} does not match algebra "
                f"dimension {alg.dimension}")
        blocks.append(-alg.ad_matrix(Y))
    return np.concatenate(blocks, axis=1)


def matrix_rank_with_threshold(M, rtol=RANK_RTOL):
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0, 0.0
    return int(np.sum(s > rtol * s[0])), float(s[0])


@dataclass
class NgSearchResult:
    algebra: str
    found: bool
    N: int | None
    witness: np.ndarray | None
    rank_threshold: float
    cap: int
    diagnostics: list = field(default_factory=list)

    def right_inverse(self, alg):
        """Pseudoinverse right inverse of K_Y for the found witness."""
        if not self.found:
            raise ValueError("no witness to invert")
        return np.linalg.pinv(k_y_operator(alg, self.witness))


def n_lower_search(alg, n_cap, trials=40, seed=0):
    """Smallest N <= n_cap with a surjective K_Y, or a certified absence.

    For each N the structured candidate (regular Cartan element, simple
    root sum, repeated cyclically) is tried first when the algebra carries
    Cartan data, then `trials` standard-normal random tuples.  Finding a
    witness proves the invariant is <= N; exhaustion up to the cap is
    reported as absence of a witness, which is conclusive only for the
    N = 1 kernel obstruction.
    """
    if n_cap < 1:
        raise ValueError("n_cap must be at least 1")
    rng = np.random.default_rng(seed)
    d = alg.dimension
    diagnostics = []
    for N in range(1, n_cap + 1):
        candidates = []
        if alg.cartan_regular is not None and alg.root_sum is not None:
            pair = [alg.cartan_regular, alg.root_sum]
            structured = np.stack([pair[i % 2] for i in range(N)])
            candidates.append(("structured", structured))
        for t in range(trials):
            candidates.append((f"random-{t}", rng.standard_normal((N, d))))
        for label, Y in candidates:
            rank, smax = matrix_rank_with_threshold(k_y_operator(alg, Y))
            diagnostics.append({"N": N, "candidate": label, "rank": rank})
            if rank == d:
                return NgSearchResult(algebra=alg.name, found=True, N=N,
                                      witness=np.asarray(Y, dtype=np.float64),
                                      rank_threshold=RANK_RTOL, cap=n_cap,
                                      diagnostics=diagnostics)
    return NgSearchResult(algebra=alg.name, found=False, N=None, witness=None,
                          rank_threshold=RANK_RTOL, cap=n_cap,
                          diagnostics=diagnostics)


def ad_integral_residual(alg, Y, quadrature_points=65):
    """Operator-norm residual of id - Ad_{exp Y} = -ad_Y o int Ad_{exp tY} dt.

    The integral uses composite Simpson quadrature on `quadrature_points`
    nodes (odd, >= 3); the residual converges at 4th order in the step.
    Requires a matrix representation to evaluate Ad.
    """
    if alg.matrix_rep is None:
        raise ValueError("the integral identity check needs a matrix representation")
    n = int(quadrature_points)
    if n < 3 or n % 2 == 0:
        raise ValueError("quadrature_points must be an odd integer >= 3")
    Y = np.asarray(Y, dtype=np.float64)
    rep_y = alg.rep(Y)
    d = alg.dimension
    lhs = np.eye(d) - alg.adjoint_operator(expm(rep_y))
    h = 1.0 / (n - 1)
    weights = np.ones(n)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    weights *= h / 3.0
    integral = np.zeros((d, d))
    for i, t in enumerate(np.linspace(0.0, 1.0, n)):
        integral += weights[i] * alg.adjoint_operator(expm(t * rep_y))
    rhs = -alg.ad_matrix(Y) @ integral
    return float(np.linalg.norm(lhs - rhs, 2))


# -- serialization -----------------------------------------------------------

def algebra_to_payload(alg):
    payload = {
        "name": alg.name,
        "dimension": alg.dimension,
        "structure_constants": alg.structure_constants.tolist(),
    }
    if alg.matrix_rep is not None:
        payload["matrix_representation"] = alg.matrix_rep.tolist()
    if alg.cartan_regular is not None:
        payload["cartan_regular"] = alg.cartan_regular.tolist()
    if alg.root_sum is not None:
        payload["root_sum"] = alg.root_sum.tolist()
    return payload


def algebra_from_payload(payload):
    return FiniteLieAlgebra(
        payload["structure_constants"],
        matrix_rep=payload.get("matrix_representation"),
        cartan_regular=payload.get("cartan_regular"),
        root_sum=payload.get("root_sum"),
        name=payload.get("name", ""))
