"""Dense LP/QP solving with checkable optimality and infeasibility certificates.

The LP path wraps scipy's HiGHS interface and augments it with polished
Farkas certificates (infeasibility) and descent rays (unboundedness).
The QP path is a primal active-set method for strictly convex Hessians;
singular-PSD Hessians are routed through a tiny ridge regularization and a
final unregularized polish on the terminal active set.  Problem sizes here
are small (tens of variables), so dense linear algebra throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy.optimize import linprog, nnls

from .errors import DimensionMismatch


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_CAP = "iteration_cap"


@dataclass
class SolverConfig:
    """Centralized numerical tolerances.

    feas_tol: constraint violation accepted as feasible.
    dual_tol: dual nonnegativity slack.
    kkt_tol: certified bound on the KKT residual of Optimal results.
    singular_rel_tol: H is routed to the singular path below this relative
        smallest eigenvalue.
    ridge: regularization added to singular Hessians (values are always
        reported with the unregularized objective).
    """

    feas_tol: float = 1e-9
    dual_tol: float = 1e-8
    kkt_tol: float = 1e-8
    singular_rel_tol: float = 1e-9
    ridge: float = 1e-10
    psd_tol: float = 1e-9
    zero_step_tol: float = 1e-11
    max_iter_base: int = 100
    max_iter_per_row: int = 10


DEFAULT_CONFIG = SolverConfig()


@dataclass
class SolveResult:
    status: SolveStatus
    z: Optional[np.ndarray] = None
    value: Optional[float] = None
    duals: Optional[np.ndarray] = None
    kkt_residual: Optional[float] = None
    certificate: Optional[np.ndarray] = None  # Farkas y or descent ray
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL


@dataclass(frozen=True)
class QuadraticProgram:
    """min_z 0.5 z'Hz + f'z  s.t.  Gz <= g, with H symmetric PSD."""

    H: np.ndarray
    f: np.ndarray
    G: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        f = np.asarray(self.f, dtype=float).ravel()
        G = np.asarray(self.G, dtype=float)
        g = np.asarray(self.g, dtype=float).ravel()
        if G.size == 0:
            G = np.zeros((0, f.size))
        G = np.atleast_2d(G)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "g", g)
        nv = f.size
        if H.shape != (nv, nv):
            raise DimensionMismatch("H must be square and match f")
        if G.shape[1] != nv or G.shape[0] != g.size:
            raise DimensionMismatch("G/g dimensions inconsistent with f")
        if np.linalg.norm(H - H.T, ord="fro") > 1e-8 * max(1.0, np.linalg.norm(H)):
            raise ValueError("H must be symmetric")
        w = np.linalg.eigvalsh(0.5 * (H + H.T))
        if w.min() < -DEFAULT_CONFIG.psd_tol * max(1.0, abs(w.max())):
            raise ValueError(f"H must be PSD (min eigenvalue {w.min():.3e})")

    def objective(self, z: np.ndarray) -> float:
        z = np.asarray(z, dtype=float).ravel()
        return float(0.5 * z @ self.H @ z + self.f @ z)


def kkt_residual_qp(H, f, G, g, z, y) -> float:
    """Max-norm KKT residual: stationarity, primal/dual feasibility,
    complementarity."""
    slack = G @ z - g if G.shape[0] else np.zeros(0)
    stat = float(np.max(np.abs(H @ z + f + (G.T @ y if G.shape[0] else 0.0))))
    pfeas = float(max(0.0, slack.max())) if slack.size else 0.0
    dfeas = float(max(0.0, -y.min())) if y.size else 0.0
    comp = float(np.max(np.abs(y * slack))) if slack.size else 0.0
    return max(stat, pfeas, dfeas, comp)


def kkt_residual_lp(c, G, g, z, y) -> float:
    return kkt_residual_qp(np.zeros((c.size, c.size)), c, G, g, z, y)


def _polish_farkas(G, g, y_raw, tol):
    """Refine a Farkas candidate on its support: solve G'_S y_S = 0 with
    sum(y_S) = 1 by least squares, then validate."""
    support = np.flatnonzero(y_raw > 1e-12 * max(1.0, y_raw.max()))
    if support.size == 0:
        return None
    A = np.vstack([G[support].T, np.ones((1, support.size))])
    b = np.zeros(A.shape[0])
    b[-1] = 1.0
    ys, *_ = np.linalg.lstsq(A, b, rcond=None)
    y = np.zeros(G.shape[0])
    y[support] = ys
    if y.min() < -tol:
        return None
    y = np.maximum(y, 0.0)
    scale = np.max(np.abs(y))
    if scale <= 0:
        return None
    y = y / scale
    if np.max(np.abs(G.T @ y)) <= tol and y @ g < -tol:
        return y
    return None


def farkas_certificate(G, g, tol=1e-9):
    """Find y >= 0 with y'G = 0 and y'g < 0, or None if Gz <= g is feasible."""
    q, nv = G.shape
    res = linprog(
        c=np.zeros(q),
        A_eq=G.T,
        b_eq=np.zeros(nv),
        A_ub=g.reshape(1, -1),
        b_ub=np.array([-1.0]),
        bounds=[(0, None)] * q,
        method="highs",
    )
    if res.status != 0:
        return None
    y = np.maximum(res.x, 0.0)
    polished = _polish_farkas(G, g, y, tol)
    if polished is not None:
        return polished
    scale = np.max(np.abs(y))
    if scale <= 0:
        return None
    y = y / scale
    if np.max(np.abs(G.T @ y)) <= tol and y @ g < -tol:
        return y
    return None


def _polish_lp_duals(c, G, g, z, y, feas_tol):
    """Recompute duals on near-active rows by NNLS to tighten stationarity."""
    slack = g - G @ z
    active = np.flatnonzero(slack <= 1e2 * feas_tol * (1.0 + np.abs(g)))
    y_new = np.zeros_like(y)
    if active.size:
        sol, _ = nnls(G[active].T, -c)
        y_new[active] = sol
    return y_new


def solve_lp(c, G, g, config: SolverConfig = DEFAULT_CONFIG) -> SolveResult:
    """Minimize c'z subject to Gz <= g.

    Infeasible status always carries a validated Farkas certificate;
    unbounded status carries a descent ray v with Gv <= 0, c'v < 0.
    """
    c = np.asarray(c, dtype=float).ravel()
    G = np.atleast_2d(np.asarray(G, dtype=float))
    g = np.asarray(g, dtype=float).ravel()
    if G.shape[1] != c.size or G.shape[0] != g.size:
        raise DimensionMismatch("LP data dimensions inconsistent")
    res = linprog(c, A_ub=G, b_ub=g, bounds=[(None, None)] * c.size, method="highs")
    if res.status == 0:
        z = res.x
        y = -np.asarray(res.ineqlin.marginals, dtype=float)
        y = np.maximum(y, 0.0)
        resid = kkt_residual_lp(c, G, g, z, y)
        if resid > config.kkt_tol / 10:
            y_pol = _polish_lp_duals(c, G, g, z, y, config.feas_tol)
            resid_pol = kkt_residual_lp(c, G, g, z, y_pol)
            if resid_pol < resid:
                y, resid = y_pol, resid_pol
        return SolveResult(
            status=SolveStatus.OPTIMAL,
            z=z,
            value=float(res.fun),
            duals=y,
            kkt_residual=resid,
            iterations=int(res.nit),
        )
    if res.status == 2:
        cert = farkas_certificate(G, g)
        if cert is not None:
            return SolveResult(status=SolveStatus.INFEASIBLE, certificate=cert)
        return SolveResult(status=SolveStatus.ITERATION_CAP)
    if res.status == 3:
        ray = _descent_ray(c, G)
        return SolveResult(status=SolveStatus.UNBOUNDED, certificate=ray)
    return SolveResult(status=SolveStatus.ITERATION_CAP)


def _descent_ray(c, G):
    """Find v with Gv <= 0 and c'v = -1 (exists when the LP is unbounded)."""
    nv = c.size
    res = linprog(
        c=np.zeros(nv),
        A_ub=G,
        b_ub=np.zeros(G.shape[0]),
        A_eq=c.reshape(1, -1),
        b_eq=np.array([-1.0]),
        bounds=[(None, None)] * nv,
        method="highs",
    )
    return res.x if res.status == 0 else None


def _phase1_point(G, g, config):
    """Feasible point via min t s.t. Gz - t*1 <= g (t capped below at -1)."""
    q, nv = G.shape
    A = np.hstack([G, -np.ones((q, 1))])
    c = np.zeros(nv + 1)
    c[-1] = 1.0
    bounds = [(None, None)] * nv + [(-1.0, None)]
    res = linprog(c, A_ub=A, b_ub=g, bounds=bounds, method="highs")
    if res.status != 0 or res.x[-1] > config.feas_tol:
        return None
    return res.x[:nv]


def _eqp_step(H, f, G_active, g_active):
    """Solve the equality-constrained QP KKT system by least squares."""
    nv = f.size
    na = G_active.shape[0]
    KKT = np.zeros((nv + na, nv + na))
    KKT[:nv, :nv] = H
    if na:
        KKT[:nv, nv:] = G_active.T
        KKT[nv:, :nv] = G_active
    rhs = np.concatenate([-f, g_active])
    sol, *_ = np.linalg.lstsq(KKT, rhs, rcond=None)
    return sol[:nv], sol[nv:]


def _active_set_qp(H, f, G, g, z0, config):
    """Primal active-set iteration from a feasible z0 (H strictly convex)."""
    q = G.shape[0]
    max_iter = config.max_iter_base + config.max_iter_per_row * max(q, 1)
    z = z0.copy()
    active: list[int] = []
    for it in range(1, max_iter + 1):
        Ga = G[active] if active else np.zeros((0, z.size))
        ga = g[list(active)] if active else np.zeros(0)
        z_eq, lam = _eqp_step(H, f, Ga, ga)
        p = z_eq - z
        if np.max(np.abs(p)) <= config.zero_step_tol * (1.0 + np.max(np.abs(z))):
            if lam.size == 0 or lam.min() >= -config.dual_tol:
                duals = np.zeros(q)
                for idx, j in enumerate(active):
                    duals[j] = max(lam[idx], 0.0)
                return z, duals, it, True
            drop = active[int(np.argmin(lam))]
            active.remove(drop)
            continue
        # step length to the nearest blocking inactive constraint
        nu = 1.0
        block = -1
        if q:
            mask = np.ones(q, dtype=bool)
            mask[active] = False
            Gp = G @ p
            for j in np.flatnonzero(mask & (Gp > 1e-13)):
                ratio = max(0.0, (g[j] - G[j] @ z)) / Gp[j]
                if ratio < nu - 1e-15:
                    nu = ratio
                    block = j
        z = z + nu * p
        if block >= 0:
            active.append(block)
    return z, np.zeros(q), max_iter, False


def _polish_singular(H, f, G, g, z_reg, duals_reg, config):
    """Re-solve the terminal active set with the unregularized Hessian."""
    active = np.flatnonzero(duals_reg > config.dual_tol)
    slack = g - G @ z_reg if G.shape[0] else np.zeros(0)
    tight = np.flatnonzero(slack <= 10 * config.feas_tol * (1.0 + np.abs(g)))
    rows = sorted(set(active.tolist()) | set(tight.tolist()))
    Ga = G[rows] if rows else np.zeros((0, z_reg.size))
    ga = g[list(rows)] if rows else np.zeros(0)
    z, lam = _eqp_step(H, f, Ga, ga)
    if not np.all(np.isfinite(z)):
        return None
    if G.shape[0] and np.max(G @ z - g) > 10 * config.feas_tol * (1.0 + np.max(np.abs(g))):
        return None
    duals = np.zeros(G.shape[0])
    for idx, j in enumerate(rows):
        if lam[idx] < -config.dual_tol:
            return None
        duals[j] = max(lam[idx], 0.0)
    resid = kkt_residual_qp(H, f, G, g, z, duals)
    if resid > config.kkt_tol:
        return None
    return z, duals, resid


def solve_qp(
    qp: QuadraticProgram,
    warm: Optional[np.ndarray] = None,
    config: SolverConfig = DEFAULT_CONFIG,
) -> SolveResult:
    """Global minimizer of a convex QP with inequality constraints.

    Warm starts only ever change the iteration count, never the value.  For
    singular-PSD Hessians any minimizer is accepted (value unique); the
    returned one is the deterministic ridge-regularized choice.
    """
    H, f, G, g = qp.H, qp.f, qp.G, qp.g
    q, nv = G.shape[0], f.size

    eigs = np.linalg.eigvalsh(0.5 * (H + H.T))
    singular = eigs.min() <= config.singular_rel_tol * max(1.0, eigs.max())
    H_work = H + config.ridge * np.eye(nv) if singular else H

    if q == 0:
        z = np.linalg.solve(H_work, -f)
        return SolveResult(
            status=SolveStatus.OPTIMAL,
            z=z,
            value=qp.objective(z),
            duals=np.zeros(0),
            kkt_residual=kkt_residual_qp(H, f, G, g, z, np.zeros(0)),
            iterations=0,
        )

    z0 = None
    if warm is not None:
        warm = np.asarray(warm, dtype=float).ravel()
        if warm.size == nv and np.max(G @ warm - g) <= config.feas_tol:
            z0 = warm
    if z0 is None:
        z0 = _phase1_point(G, g, config)
        if z0 is None:
            cert = farkas_certificate(G, g)
            if cert is not None:
                return SolveResult(status=SolveStatus.INFEASIBLE, certificate=cert)
            return SolveResult(status=SolveStatus.ITERATION_CAP)

    z, duals, iters, ok = _active_set_qp(H_work, f, G, g, z0, config)
    if not ok:
        return SolveResult(status=SolveStatus.ITERATION_CAP, z=z, iterations=iters)

    if singular:
        polished = _polish_singular(H, f, G, g, z, duals, config)
        if polished is not None:
            z, duals, resid = polished
        else:
            resid = kkt_residual_qp(H, f, G, g, z, duals)
    else:
        resid = kkt_residual_qp(H, f, G, g, z, duals)

    return SolveResult(
        status=SolveStatus.OPTIMAL,
        z=z,
        value=qp.objective(z),
        duals=duals,
        kkt_residual=resid,
        iterations=iters,
    )
