"""Condensed full-order MPC problem: J_N(x, z) as an explicit quadratic in z
and the optimal value / optimizer maps obtained by a single dense QP solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .control_core import FeedbackGain, LinearSystem
from .errors import InfeasibleProblem
from .geometry import AdmissibleSetRep, Polytope, TerminalIngredients, admissible_set, prediction_matrices
from .solvers import DEFAULT_CONFIG, QuadraticProgram, SolveStatus, SolverConfig, solve_qp


@dataclass(frozen=True)
class CondensedProblem:
    """J_N(x, z) = z'Hz + 2 x'Fz + x'c0 x over z in U^N(x).

    H is strictly positive definite: with u = Kx + z the input-weight block
    contributes T'RT with T unit lower triangular.
    """

    H: np.ndarray
    F: np.ndarray
    c0: np.ndarray
    admissible: AdmissibleSetRep
    sys: LinearSystem
    K: FeedbackGain
    term: TerminalIngredients
    X: Polytope
    U: Polytope
    N: int

    @property
    def d(self) -> int:
        return self.N * self.sys.m

    def cost(self, x, z) -> float:
        x = np.asarray(x, dtype=float).ravel()
        z = np.asarray(z, dtype=float).ravel()
        return float(z @ self.H @ z + 2.0 * x @ self.F @ z + x @ self.c0 @ x)


def condense(
    sys: LinearSystem,
    K: FeedbackGain,
    term: TerminalIngredients,
    N: int,
    X: Polytope,
    U: Polytope,
) -> CondensedProblem:
    """Exact algebraic condensation of cost and constraints through the
    pre-stabilized dynamics."""
    K.check(sys)
    n, m = sys.n, sys.m
    Phi, Rmat = prediction_matrices(sys, K, N)
    d = N * m
    # block cost weights: Q at steps 0..N-1, Pf at step N; R on all inputs
    Qbar = np.zeros(((N + 1) * n, (N + 1) * n))
    for k in range(N):
        Qbar[k * n : (k + 1) * n, k * n : (k + 1) * n] = sys.Q
    Qbar[N * n :, N * n :] = term.Pf
    Rbar = np.kron(np.eye(N), sys.R)
    # stacked inputs: U = Ks (Phi x + R z) + z
    Ks = np.zeros((d, (N + 1) * n))
    for k in range(N):
        Ks[k * m : (k + 1) * m, k * n : (k + 1) * n] = K.K
    S = Ks @ Phi
    T = Ks @ Rmat + np.eye(d)
    H = Rmat.T @ Qbar @ Rmat + T.T @ Rbar @ T
    F = Phi.T @ Qbar @ Rmat + S.T @ Rbar @ T
    c0 = Phi.T @ Qbar @ Phi + S.T @ Rbar @ S
    H = 0.5 * (H + H.T)
    c0 = 0.5 * (c0 + c0.T)
    if np.linalg.eigvalsh(H).min() <= 0:
        raise ValueError("condensed Hessian is not positive definite")
    rep = admissible_set(sys, K, term, N, X, U)
    return CondensedProblem(
        H=H, F=F, c0=c0, admissible=rep, sys=sys, K=K, term=term, X=X, U=U, N=N
    )


def solve_full(
    cp: CondensedProblem,
    x,
    warm=None,
    config: SolverConfig = DEFAULT_CONFIG,
):
    """Optimizer z* = mu_N(x) and value V_N(x) of the full-order problem.

    Raises InfeasibleProblem (with Farkas certificate) when x is outside the
    feasible set X_N.
    """
    x = np.asarray(x, dtype=float).ravel()
    rep = cp.admissible
    qp = QuadraticProgram(H=2.0 * cp.H, f=2.0 * cp.F.T @ x, G=rep.Gz, g=rep.rhs(x))
    res = solve_qp(qp, warm=warm, config=config)
    if res.status is SolveStatus.INFEASIBLE:
        raise InfeasibleProblem("x outside the feasible set X_N", certificate=res.certificate)
    if res.status is not SolveStatus.OPTIMAL:
        raise InfeasibleProblem(f"QP solve failed with status {res.status}")
    z = res.z
    return z, cp.cost(x, z)
