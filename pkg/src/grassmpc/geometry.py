"""Polyhedral computations in H-representation.

Everything here reduces to small dense LPs: containment, support values,
Chebyshev centers, redundancy pruning, the maximal positively invariant set
and the stacked admissible-input-sequence polytope of a pre-stabilized MPC
problem, parametrized affinely in the initial state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .control_core import FeedbackGain, LinearSystem, is_symmetric_pd, spectral_radius
from .errors import (
    DimensionMismatch,
    EmptyPolytope,
    IterationCapExceeded,
    OriginInfeasible,
)
from .solvers import DEFAULT_CONFIG, SolveStatus, solve_lp

CONTAIN_TOL = 1e-9


@dataclass(frozen=True)
class Polytope:
    """H-representation set {z : G z <= g}."""

    G: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.G, dtype=float))
        g = np.asarray(self.g, dtype=float).ravel()
        if G.shape[0] != g.size:
            raise DimensionMismatch("row counts of G and g differ")
        if not (np.all(np.isfinite(G)) and np.all(np.isfinite(g))):
            raise ValueError("polytope data contains NaN/Inf")
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "g", g)

    @property
    def dim(self) -> int:
        return self.G.shape[1]

    @property
    def num_rows(self) -> int:
        return self.G.shape[0]

    @classmethod
    def from_box(cls, lb, ub) -> "Polytope":
        lb = np.asarray(lb, dtype=float).ravel()
        ub = np.asarray(ub, dtype=float).ravel()
        if lb.size != ub.size or np.any(lb > ub):
            raise ValueError("invalid box bounds")
        n = lb.size
        return cls(np.vstack([np.eye(n), -np.eye(n)]), np.concatenate([ub, -lb]))

    def contains(self, z, tol: float = CONTAIN_TOL) -> bool:
        z = np.asarray(z, dtype=float).ravel()
        if z.size != self.dim:
            raise DimensionMismatch(f"point has dim {z.size}, polytope {self.dim}")
        return bool(np.max(self.G @ z - self.g) <= tol)

    def violation(self, z) -> float:
        z = np.asarray(z, dtype=float).ravel()
        return float(np.max(self.G @ z - self.g))

    def support(self, direction) -> float:
        """max_{z in P} direction' z (raises EmptyPolytope; inf if unbounded)."""
        d = np.asarray(direction, dtype=float).ravel()
        res = solve_lp(-d, self.G, self.g)
        if res.status is SolveStatus.INFEASIBLE:
            raise EmptyPolytope("support of empty polytope")
        if res.status is SolveStatus.UNBOUNDED:
            return np.inf
        return -res.value

    def is_bounded(self) -> bool:
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = 1.0
            if not (np.isfinite(self.support(e)) and np.isfinite(self.support(-e))):
                return False
        return True

    def is_empty(self) -> bool:
        res = solve_lp(np.zeros(self.dim), self.G, self.g)
        return res.status is SolveStatus.INFEASIBLE

    def intersect(self, other: "Polytope") -> "Polytope":
        if other.dim != self.dim:
            raise DimensionMismatch("cannot intersect polytopes of different dims")
        return Polytope(np.vstack([self.G, other.G]), np.concatenate([self.g, other.g]))

    def contains_polytope(self, other: "Polytope", tol: float = CONTAIN_TOL) -> bool:
        """self >= other, decided by support LPs over the rows of self."""
        for i in range(self.num_rows):
            if other.support(self.G[i]) > self.g[i] + tol * (1.0 + abs(self.g[i])):
                return False
        return True

    def pruned(self, tol: float = CONTAIN_TOL) -> "Polytope":
        """Drop rows implied by the remaining ones (per-row support LPs)."""
        keep = list(range(self.num_rows))
        i = 0
        while i < len(keep):
            others = keep[:i] + keep[i + 1 :]
            if not others:
                break
            row = keep[i]
            res = solve_lp(-self.G[row], self.G[others], self.g[others])
            redundant = (
                res.status is SolveStatus.OPTIMAL
                and -res.value <= self.g[row] + tol * (1.0 + abs(self.g[row]))
            )
            if redundant:
                keep.pop(i)
            else:
                i += 1
        return Polytope(self.G[keep], self.g[keep])

    def to_json_dict(self) -> dict:
        return {"G": self.G.tolist(), "g": self.g.tolist()}

    @classmethod
    def from_json_dict(cls, d: dict) -> "Polytope":
        return cls(np.asarray(d["G"], dtype=float), np.asarray(d["g"], dtype=float))

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json(cls, s: str) -> "Polytope":
        return cls.from_json_dict(json.loads(s))


def contains(P: Polytope, z, tol: float = CONTAIN_TOL) -> bool:
    return P.contains(z, tol)


def chebyshev_center(P: Polytope):
    """Center and radius of the largest inscribed ball, by a single LP."""
    q, n = P.G.shape
    norms = np.linalg.norm(P.G, axis=1)
    A = np.hstack([P.G, norms.reshape(-1, 1)])
    c = np.zeros(n + 1)
    c[-1] = -1.0  # maximize r
    res = solve_lp(c, A, P.g)
    if res.status is SolveStatus.INFEASIBLE:
        raise EmptyPolytope("Chebyshev LP infeasible")
    if res.status is not SolveStatus.OPTIMAL:
        raise EmptyPolytope(f"Chebyshev LP failed with status {res.status}")
    return res.z[:n], float(res.z[n])


def mve_center(P: Polytope):
    """Center of the maximum-volume inscribed ellipsoid (convex program)."""
    import cvxpy as cp

    n = P.dim
    B = cp.Variable((n, n), PSD=True)
    c = cp.Variable(n)
    cons = [cp.norm(B @ P.G[i]) + P.G[i] @ c <= P.g[i] for i in range(P.num_rows)]
    prob = cp.Problem(cp.Maximize(cp.log_det(B)), cons)
    prob.solve()
    if prob.status not in ("optimal", "optimal_inaccurate"):
        raise EmptyPolytope(f"MVE program failed with status {prob.status}")
    return np.asarray(c.value, dtype=float).ravel()


def polytope_center(P: Polytope, method: str = "chebyshev"):
    if method == "chebyshev":
        return chebyshev_center(P)[0]
    if method == "mve":
        return mve_center(P)
    raise ValueError(f"unknown center method {method!r}")


def max_invariant_set(Acl, Xc: Polytope, max_iter: int = 500) -> Polytope:
    """Maximal positively invariant subset of Xc for x+ = Acl x.

    Fixed point of Omega_{k+1} = Omega_k n {x : Acl x in Omega_k} starting
    from Omega_0 = Xc; termination when the newly generated rows are all
    redundant for the current iterate.
    """
    Acl = np.atleast_2d(np.asarray(Acl, dtype=float))
    if spectral_radius(Acl) >= 1.0:
        raise ValueError("Acl must be Schur for the invariant set to terminate")
    G0, g0 = Xc.G, Xc.g
    rows_G = [G0]
    rows_g = [g0]
    Gpow = G0 @ Acl
    for _ in range(max_iter):
        current = Polytope(np.vstack(rows_G), np.concatenate(rows_g))
        redundant = True
        for i in range(Gpow.shape[0]):
            if current.support(Gpow[i]) > g0[i] + CONTAIN_TOL * (1.0 + abs(g0[i])):
                redundant = False
                break
        if redundant:
            return current.pruned()
        rows_G.append(Gpow)
        rows_g.append(g0)
        Gpow = Gpow @ Acl
    raise IterationCapExceeded(f"invariant set not determined in {max_iter} steps")


@dataclass(frozen=True)
class TerminalIngredients:
    """Terminal weight Pf, terminal gain Kf and terminal polytope Xf."""

    Pf: np.ndarray
    Kf: np.ndarray
    Xf: Polytope

    def __post_init__(self):
        object.__setattr__(self, "Pf", np.atleast_2d(np.asarray(self.Pf, dtype=float)))
        object.__setattr__(self, "Kf", np.atleast_2d(np.asarray(self.Kf, dtype=float)))
        if not is_symmetric_pd(self.Pf):
            raise ValueError("Pf must be symmetric positive definite")

    def terminal_cost(self, x) -> float:
        x = np.asarray(x, dtype=float).ravel()
        return float(x @ self.Pf @ x)

    def check(self, sys: LinearSystem, X: Polytope, U: Polytope, rng=None, samples=200):
        """Invariance, constraint satisfaction and Lyapunov decrease on Xf."""
        if not X.contains_polytope(self.Xf):
            raise ValueError("Xf is not contained in the state constraint set")
        if np.any(self.Xf.g <= 0):
            raise ValueError("Xf must contain the origin in its interior")
        Acl = sys.A + sys.B @ self.Kf
        mapped = Polytope(self.Xf.G @ Acl, self.Xf.g)
        if not mapped.contains_polytope(self.Xf):
            raise ValueError("Xf is not positively invariant under A + B Kf")
        input_ok = Polytope(U.G @ self.Kf, U.g)
        if not input_ok.contains_polytope(self.Xf):
            raise ValueError("terminal controller leaves the input set on Xf")
        rng = np.random.default_rng(0) if rng is None else rng
        for x in sample_in_polytope(self.Xf, samples, rng):
            xp = Acl @ x
            dec = self.terminal_cost(x) - self.terminal_cost(xp)
            if dec < sys.stage_cost(x, self.Kf @ x) - 1e-8:
                raise ValueError("terminal cost decrease fails on a sample")


def sample_in_polytope(P: Polytope, count: int, rng) -> np.ndarray:
    """Rejection-sample points in a compact polytope (bounding box proposals)."""
    n = P.dim
    lo = np.array([-P.support(-_unit(n, i)) for i in range(n)])
    hi = np.array([P.support(_unit(n, i)) for i in range(n)])
    out = np.zeros((count, n))
    got = 0
    while got < count:
        cand = rng.uniform(lo, hi, size=(4 * count, n))
        inside = np.max(cand @ P.G.T - P.g, axis=1) <= CONTAIN_TOL
        take = cand[inside][: count - got]
        out[got : got + take.shape[0]] = take
        got += take.shape[0]
    return out


def _unit(n, i):
    e = np.zeros(n)
    e[i] = 1.0
    return e


@dataclass(frozen=True)
class AdmissibleSetRep:
    """Affine parametrization of the admissible input-sequence sets:
    U^N(x) = {z : Gz z <= g0 + Ex x}."""

    Gz: np.ndarray
    Ex: np.ndarray
    g0: np.ndarray
    N: int
    n: int
    m: int

    @property
    def d(self) -> int:
        return self.N * self.m

    def rhs(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        return self.g0 + self.Ex @ x

    def polytope_at(self, x) -> Polytope:
        return Polytope(self.Gz, self.rhs(x))

    def contains(self, x, z, tol: float = 1e-8) -> bool:
        z = np.asarray(z, dtype=float).ravel()
        return bool(np.max(self.Gz @ z - self.rhs(x)) <= tol)

    def violation(self, x, z) -> float:
        z = np.asarray(z, dtype=float).ravel()
        return float(np.max(self.Gz @ z - self.rhs(x)))

    def shifted_polytope(self, x, offset_value) -> Polytope:
        """{z - sigma(x) : z in U^N(x)} for a fixed offset value sigma(x)."""
        off = np.asarray(offset_value, dtype=float).ravel()
        return Polytope(self.Gz, self.rhs(x) - self.Gz @ off)

    def feasible(self, x, tol: float = 1e-9) -> bool:
        res = solve_lp(np.zeros(self.d), self.Gz, self.rhs(x))
        return res.status is SolveStatus.OPTIMAL


def prediction_matrices(sys: LinearSystem, K: FeedbackGain, N: int):
    """Stacked maps of the pre-stabilized dynamics: states = Phi x + R z,
    with Phi (N+1)n x n and R (N+1)n x Nm, built by forward recurrence."""
    n, m = sys.n, sys.m
    Ak = sys.A + sys.B @ K.K
    Phi = np.zeros(((N + 1) * n, n))
    Rmat = np.zeros(((N + 1) * n, N * m))
    Phi[:n] = np.eye(n)
    for k in range(N):
        rows = slice((k + 1) * n, (k + 2) * n)
        prev = slice(k * n, (k + 1) * n)
        Phi[rows] = Ak @ Phi[prev]
        Rmat[rows] = Ak @ Rmat[prev]
        Rmat[rows, k * m : (k + 1) * m] = sys.B
    return Phi, Rmat


def admissible_set(
    sys: LinearSystem,
    K: FeedbackGain,
    term: TerminalIngredients,
    N: int,
    X: Polytope,
    U: Polytope,
) -> AdmissibleSetRep:
    """Stack x_z(k,x) in X, u_z(k,x) in U for k < N and x_z(N,x) in Xf into
    the exact affine form Gz z <= g0 + Ex x."""
    n, m = sys.n, sys.m
    if X.dim != n or U.dim != m or term.Xf.dim != n:
        raise DimensionMismatch("constraint sets do not match system dimensions")
    Phi, Rmat = prediction_matrices(sys, K, N)
    d = N * m
    blocks_Gz, blocks_Ex, blocks_g0 = [], [], []
    for k in range(N):
        rows = slice(k * n, (k + 1) * n)
        # state constraint at step k
        blocks_Gz.append(X.G @ Rmat[rows])
        blocks_Ex.append(-X.G @ Phi[rows])
        blocks_g0.append(X.g)
        # input constraint at step k: u_k = K x_k + z_k
        Ek = np.zeros((m, d))
        Ek[:, k * m : (k + 1) * m] = np.eye(m)
        blocks_Gz.append(U.G @ (K.K @ Rmat[rows] + Ek))
        blocks_Ex.append(-U.G @ (K.K @ Phi[rows]))
        blocks_g0.append(U.g)
    rows = slice(N * n, (N + 1) * n)
    blocks_Gz.append(term.Xf.G @ Rmat[rows])
    blocks_Ex.append(-term.Xf.G @ Phi[rows])
    blocks_g0.append(term.Xf.g)
    return AdmissibleSetRep(
        Gz=np.vstack(blocks_Gz),
        Ex=np.vstack(blocks_Ex),
        g0=np.concatenate(blocks_g0),
        N=N,
        n=n,
        m=m,
    )


def feasible_set_inner(
    sys: LinearSystem,
    K: FeedbackGain,
    term: TerminalIngredients,
    N: int,
    X: Polytope,
    U: Polytope,
    directions: int = 64,
    tol: float = 1e-6,
) -> np.ndarray:
    """Inner vertex approximation of the feasible set X_N by ray shooting.

    Along each of `directions` equally spaced rays, bisection finds the
    largest rho with U^N(rho * dir) nonempty.  Requires n = 2; for other
    dimensions supply the vertex list directly.
    """
    if sys.n != 2:
        raise DimensionMismatch("ray-shooting mode requires n = 2")
    rep = admissible_set(sys, K, term, N, X, U)
    if not rep.feasible(np.zeros(2)):
        raise OriginInfeasible("x = 0 has empty admissible set")
    vertices = []
    for theta in np.linspace(0.0, 2 * np.pi, directions, endpoint=False):
        direction = np.array([np.cos(theta), np.sin(theta)])
        # the ray leaves X at rho_hi; X_N is contained in X
        with np.errstate(divide="ignore"):
            rates = X.G @ direction
            caps = np.where(rates > 1e-12, X.g / np.where(rates > 1e-12, rates, 1.0), np.inf)
        rho_hi = float(np.min(caps))
        if rep.feasible(rho_hi * direction):
            vertices.append(rho_hi * direction)
            continue
        lo, hi = 0.0, rho_hi
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if rep.feasible(mid * direction):
                lo = mid
            else:
                hi = mid
        vertices.append(lo * direction)
    return np.asarray(vertices)


def hull_polytope(points: np.ndarray) -> Polytope:
    """H-representation of the convex hull of a point cloud (qhull facets)."""
    from scipy.spatial import ConvexHull

    pts = np.atleast_2d(np.asarray(points, dtype=float))
    hull = ConvexHull(pts)
    # qhull equations are [normal, offset] with normal'x + offset <= 0
    G = hull.equations[:, :-1]
    g = -hull.equations[:, -1]
    return Polytope(G, g)


def hull_vertices(points: np.ndarray) -> np.ndarray:
    """Extreme points of a 2-D (or higher) point cloud, qhull ordering."""
    from scipy.spatial import ConvexHull

    pts = np.atleast_2d(np.asarray(points, dtype=float))
    hull = ConvexHull(pts)
    return pts[hull.vertices]


def lqr_terminal_ingredients(
    sys: LinearSystem, X: Polytope, U: Polytope
) -> TerminalIngredients:
    """Standard LQR-based terminal ingredients: Pf and Kf from the DARE, Xf the
    maximal invariant set of A + B Kf inside X n {x : Kf x in U}."""
    from .control_core import dare_solve

    Pinf, Kinf = dare_solve(sys)
    Xc = X.intersect(Polytope(U.G @ Kinf, U.g)).pruned()
    Xf = max_invariant_set(sys.A + sys.B @ Kinf, Xc)
    return TerminalIngredients(Pf=Pinf, Kf=Kinf, Xf=Xf)
