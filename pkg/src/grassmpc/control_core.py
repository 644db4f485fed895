"""Linear-system fundamentals: ZOH discretization, Riccati/LQR synthesis,
pre-stabilized rollouts and the finite-horizon open-loop cost.

Conventions: the plant is x+ = A x + B u with quadratic stage cost
l(x, u) = x'Qx + u'Ru.  Pre-stabilization substitutes u = K x + z_k, so an
input sequence z = (z_0, ..., z_{N-1}) stacked into R^{N*m} is the decision
variable of every optimal control problem downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NoStabilizingSolution

PD_TOL = 1e-10
SPECTRAL_TOL = 1e-9


def _as_matrix(M, name: str) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2:
        raise DimensionMismatch(f"{name} must be a matrix, got ndim={M.ndim}")
    if not np.all(np.isfinite(M)):
        raise DimensionMismatch(f"{name} contains NaN/Inf entries")
    return M


def is_symmetric_pd(M: np.ndarray, tol: float = PD_TOL) -> bool:
    if M.shape[0] != M.shape[1]:
        return False
    if np.linalg.norm(M - M.T, ord="fro") > tol * max(1.0, np.linalg.norm(M)):
        return False
    return float(np.linalg.eigvalsh(0.5 * (M + M.T)).min()) > tol


def is_stabilizable(A: np.ndarray, B: np.ndarray, tol: float = SPECTRAL_TOL) -> bool:
    """PBH test: every |lambda| >= 1 eigenvalue of A must satisfy
    rank([A - lambda I, B]) = n."""
    n = A.shape[0]
    for lam in np.linalg.eigvals(A):
        if abs(lam) >= 1.0 - tol:
            pencil = np.hstack([A - lam * np.eye(n), B])
            if np.linalg.matrix_rank(pencil, tol=1e-10) < n:
                return False
    return True


@dataclass(frozen=True)
class LinearSystem:
    """Discrete-time LTI plant x+ = A x + B u with stage-cost weights Q, R."""

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        Q = _as_matrix(self.Q, "Q")
        R = _as_matrix(self.R, "R")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionMismatch("A must be square")
        if B.shape[0] != n:
            raise DimensionMismatch("B row count must match A")
        if Q.shape != (n, n):
            raise DimensionMismatch("Q must be n x n")
        m = B.shape[1]
        if R.shape != (m, m):
            raise DimensionMismatch("R must be m x m")
        if not is_symmetric_pd(Q):
            raise ValueError("Q must be symmetric positive definite")
        if not is_symmetric_pd(R):
            raise ValueError("R must be symmetric positive definite")
        if not is_stabilizable(A, B):
            raise ValueError("(A, B) is not stabilizable")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def stage_cost(self, x: np.ndarray, u: np.ndarray) -> float:
        x = np.asarray(x, dtype=float).ravel()
        u = np.asarray(u, dtype=float).ravel()
        return float(x @ self.Q @ x + u @ self.R @ u)


@dataclass(frozen=True)
class FeedbackGain:
    """Pre-stabilizing state feedback kappa(x) = K x."""

    K: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "K", _as_matrix(self.K, "K"))

    def check(self, sys: LinearSystem) -> None:
        if self.K.shape != (sys.m, sys.n):
            raise DimensionMismatch("K must be m x n")
        rho = spectral_radius(sys.A + sys.B @ self.K)
        if rho >= 1.0:
            raise ValueError(f"A + BK is not Schur (spectral radius {rho:.6f})")


@dataclass(frozen=True)
class InputSequence:
    """Stacked input sequence z = (z_0, ..., z_{N-1}) in R^{N*m}."""

    values: np.ndarray
    horizon: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        object.__setattr__(self, "values", v)
        if self.horizon < 1 or v.size % self.horizon != 0:
            raise DimensionMismatch(
                f"length {v.size} is not a multiple of horizon {self.horizon}"
            )

    @property
    def m(self) -> int:
        return self.values.size // self.horizon

    def component(self, k: int) -> np.ndarray:
        m = self.m
        return self.values[k * m : (k + 1) * m]


def spectral_radius(M: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def dare_solve(sys: LinearSystem, max_iter: int = 100_000, tol: float = 1e-13):
    """Stabilizing DARE solution by fixed-point value iteration from P0 = Q.

    Returns (Pinf, Kinf) with Kinf = -(R + B'PB)^{-1} B'PA, so that
    u = Kinf x makes A + B Kinf Schur.
    """
    A, B, Q, R = sys.A, sys.B, sys.Q, sys.R
    if not is_stabilizable(A, B):
        raise NoStabilizingSolution("(A, B) not stabilizable")
    P = Q.copy()
    for _ in range(max_iter):
        BtP = B.T @ P
        gain = np.linalg.solve(R + BtP @ B, BtP @ A)
        P_next = Q + A.T @ P @ A - A.T @ P @ B @ gain
        P_next = 0.5 * (P_next + P_next.T)
        if not np.all(np.isfinite(P_next)):
            raise NoStabilizingSolution("Riccati iteration diverged")
        if np.linalg.norm(P_next - P, ord="fro") < tol:
            P = P_next
            break
        P = P_next
    else:
        raise NoStabilizingSolution(
            f"value iteration did not converge within {max_iter} iterations"
        )
    BtP = B.T @ P
    Kinf = -np.linalg.solve(R + BtP @ B, BtP @ A)
    if spectral_radius(A + B @ Kinf) >= 1.0:
        raise NoStabilizingSolution("converged P does not yield a Schur closed loop")
    resid = riccati_residual(sys, P)
    if resid > 1e-9:
        raise NoStabilizingSolution(f"fixed-point residual {resid:.3e} exceeds 1e-9")
    return P, Kinf


def riccati_residual(sys: LinearSystem, P: np.ndarray) -> float:
    A, B, Q, R = sys.A, sys.B, sys.Q, sys.R
    BtP = B.T @ P
    rhs = Q + A.T @ P @ A - A.T @ P @ B @ np.linalg.solve(R + BtP @ B, BtP @ A)
    return float(np.linalg.norm(P - rhs, ord="fro"))


def _expm_taylor(M: np.ndarray, term_tol: float = 1e-14) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring over a truncated Taylor series."""
    norm = np.linalg.norm(M, ord=np.inf)
    squarings = max(0, int(np.ceil(np.log2(max(norm, 1e-300) / 0.5))))
    Ms = M / (2.0**squarings)
    E = np.eye(M.shape[0])
    term = np.eye(M.shape[0])
    k = 1
    while True:
        term = term @ Ms / k
        E = E + term
        if np.linalg.norm(term, ord=np.inf) < term_tol:
            break
        k += 1
        if k > 200:  # series always converges; guard against NaN input
            break
    for _ in range(squarings):
        E = E @ E
    return E


def discretize_zoh(Ac, Bc, Ts: float):
    """Zero-order-hold discretization via the augmented-matrix exponential:
    exp([[Ac, Bc], [0, 0]] * Ts) = [[A, B], [0, I]]."""
    Ac = _as_matrix(Ac, "Ac")
    Bc = _as_matrix(Bc, "Bc")
    if Ts <= 0:
        raise ValueError("Ts must be positive")
    n, m = Ac.shape[0], Bc.shape[1]
    if Ac.shape != (n, n) or Bc.shape[0] != n:
        raise DimensionMismatch("Ac must be n x n and Bc n x m")
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = Ac * Ts
    aug[:n, n:] = Bc * Ts
    E = _expm_taylor(aug)
    return E[:n, :n], E[:n, n:]


def _check_rollout_args(sys: LinearSystem, K: FeedbackGain, x0, z):
    x0 = np.asarray(x0, dtype=float).ravel()
    if isinstance(z, InputSequence):
        z = z.values
    z = np.asarray(z, dtype=float).ravel()
    if x0.size != sys.n:
        raise DimensionMismatch(f"x0 has size {x0.size}, expected {sys.n}")
    if K.K.shape != (sys.m, sys.n):
        raise DimensionMismatch("K must be m x n")
    if z.size % sys.m != 0:
        raise DimensionMismatch(f"len(z)={z.size} is not a multiple of m={sys.m}")
    return x0, z, z.size // sys.m


def rollout(sys: LinearSystem, K: FeedbackGain, x0, z):
    """Pre-stabilized trajectory x_z(0..N, x0) and controls u_z(0..N-1, x0).

    x_z(k+1) = A x_z(k) + B (K x_z(k) + z_k), u_z(k) = K x_z(k) + z_k.
    """
    x0, zv, N = _check_rollout_args(sys, K, x0, z)
    n, m = sys.n, sys.m
    states = np.zeros((N + 1, n))
    controls = np.zeros((N, m))
    states[0] = x0
    for k in range(N):
        u = K.K @ states[k] + zv[k * m : (k + 1) * m]
        controls[k] = u
        states[k + 1] = sys.A @ states[k] + sys.B @ u
    return states, controls


def open_loop_cost(sys: LinearSystem, K: FeedbackGain, Pf: np.ndarray, x0, z) -> float:
    """J_N(x0, z) = V_f(x_N) + sum_k l(x_k, u_k) along the pre-stabilized rollout."""
    states, controls = rollout(sys, K, x0, z)
    xN = states[-1]
    total = float(xN @ Pf @ xN)
    for k in range(controls.shape[0]):
        total += sys.stage_cost(states[k], controls[k])
    return total
