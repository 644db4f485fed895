"""Reduced-order MPC: the (alpha, tau) problem over a designed subspace, the
admissible shift that certifies recursive feasibility, and the closed-loop
scheme built from both.

The reduced decision is z = U alpha + tau * sigma(x) + (1 - tau) * ztilde,
where ztilde is the admissible guess carried across time steps.  At t = 0
the guess is 0 and feasibility is supplied by the initially admissible
(U, sigma) pair; afterwards it is supplied by the shifted previous optimum.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .control_core import FeedbackGain, rollout
from .errors import (
    DivergenceDetected,
    InfeasibleProblem,
    NotConverged,
    PreconditionViolated,
)
from .geometry import Polytope
from .mpc_full import CondensedProblem
from .solvers import DEFAULT_CONFIG, QuadraticProgram, SolveStatus, SolverConfig, solve_qp

ORTHONORMAL_TOL = 1e-10
SNAP_TOL = 1e-12
GUESS_TOL = 1e-8


@dataclass(frozen=True)
class SubspacePair:
    """Orthonormal basis U (d x r) with affine offset sigma(x) = Gamma x + xi."""

    U: np.ndarray
    Gamma: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        U = np.atleast_2d(np.asarray(self.U, dtype=float))
        Gamma = np.atleast_2d(np.asarray(self.Gamma, dtype=float))
        xi = np.asarray(self.xi, dtype=float).ravel()
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "Gamma", Gamma)
        object.__setattr__(self, "xi", xi)
        r = U.shape[1]
        gram_err = np.linalg.norm(U.T @ U - np.eye(r), ord="fro")
        if gram_err > ORTHONORMAL_TOL:
            raise ValueError(f"U columns not orthonormal (error {gram_err:.3e})")
        if Gamma.shape[0] != U.shape[0] or xi.size != U.shape[0]:
            raise ValueError("offset dimensions must match the basis rows")

    @property
    def d(self) -> int:
        return self.U.shape[0]

    @property
    def r(self) -> int:
        return self.U.shape[1]

    def sigma(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        return self.Gamma @ x + self.xi

    def to_json_dict(self) -> dict:
        return {
            "U": self.U.tolist(),
            "Gamma": self.Gamma.tolist(),
            "xi": self.xi.tolist(),
            "r": self.r,
            "d": self.d,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SubspacePair":
        return cls(
            U=np.asarray(d["U"], dtype=float),
            Gamma=np.asarray(d["Gamma"], dtype=float),
            xi=np.asarray(d["xi"], dtype=float),
        )


@dataclass(frozen=True)
class ExtendedState:
    """Closed-loop state (x, ztilde): plant state plus admissible guess."""

    x: np.ndarray
    ztilde: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).ravel())
        object.__setattr__(self, "ztilde", np.asarray(self.ztilde, dtype=float).ravel())

    def validate(self, rep, X0: Optional[Polytope] = None, tol: float = GUESS_TOL) -> str:
        """Return the mode ('M1' or 'M2') or raise PreconditionViolated."""
        if np.max(np.abs(self.ztilde)) == 0.0 and X0 is not None and X0.contains(self.x, tol):
            return "M1"
        if rep.contains(self.x, self.ztilde, tol):
            return "M2"
        raise PreconditionViolated("extended state lies in neither M1 nor M2")


@dataclass
class ReducedSolution:
    alpha: np.ndarray
    tau: float
    z: np.ndarray
    value: float
    iterations: int = 0


def solve_reduced(
    cp: CondensedProblem,
    pair: SubspacePair,
    x,
    ztilde,
    config: SolverConfig = DEFAULT_CONFIG,
) -> ReducedSolution:
    """Solve the reduced problem in the r+1 variables (alpha, tau).

    When ztilde is admissible the fall-back (alpha, tau) = (0, 0) is feasible,
    so the returned value never exceeds J_N(x, ztilde).
    """
    x = np.asarray(x, dtype=float).ravel()
    ztilde = np.asarray(ztilde, dtype=float).ravel()
    rep = cp.admissible
    if pair.d != cp.d or ztilde.size != cp.d:
        raise PreconditionViolated("basis/guess dimensions do not match the horizon")
    M = np.hstack([pair.U, (pair.sigma(x) - ztilde).reshape(-1, 1)])
    Hw = 2.0 * (M.T @ cp.H @ M)
    Hw = 0.5 * (Hw + Hw.T)
    fw = 2.0 * M.T @ (cp.H @ ztilde + cp.F.T @ x)
    Gw = rep.Gz @ M
    gw = rep.rhs(x) - rep.Gz @ ztilde
    qp = QuadraticProgram(H=Hw, f=fw, G=Gw, g=gw)
    warm = np.zeros(pair.r + 1) if np.max(rep.Gz @ ztilde - rep.rhs(x)) <= config.feas_tol else None
    res = solve_qp(qp, warm=warm, config=config)
    if res.status is SolveStatus.INFEASIBLE:
        raise InfeasibleProblem(
            "reduced problem infeasible: pair is not admissible at this state",
            certificate=res.certificate,
        )
    if res.status is not SolveStatus.OPTIMAL:
        raise InfeasibleProblem(f"reduced QP failed with status {res.status}")
    w = res.z
    z = M @ w + ztilde
    return ReducedSolution(
        alpha=w[:-1], tau=float(w[-1]), z=z, value=cp.cost(x, z), iterations=res.iterations
    )


def admissible_shift(cp: CondensedProblem, x, z, tol: float = GUESS_TOL) -> np.ndarray:
    """One-step shift of an admissible z, appended with kappa_f - kappa at the
    predicted terminal state; admissible for the successor state by the
    terminal ingredients."""
    x = np.asarray(x, dtype=float).ravel()
    z = np.asarray(z, dtype=float).ravel()
    rep = cp.admissible
    if rep.violation(x, z) > tol:
        raise PreconditionViolated("z is not admissible for x")
    states, _ = rollout(cp.sys, cp.K, x, z)
    x1 = states[1]
    if np.linalg.norm(x1) <= SNAP_TOL:
        return np.zeros_like(z)
    m = cp.sys.m
    xN = states[-1]
    shifted = np.concatenate([z[m:], (cp.term.Kf - cp.K.K) @ xN])
    viol = rep.violation(x1, shifted)
    if viol > tol:
        raise PreconditionViolated(
            f"shifted sequence violates admissibility by {viol:.3e}"
        )
    return shifted


@dataclass
class ClosedLoopTrace:
    """Per-step record of a closed-loop run.

    states has one more row than the step arrays (the final state).
    guess_violations[t] is the admissibility violation of the guess used at
    step t (meaningful for t >= 1; at t = 0 the guess is the zero sequence).
    """

    states: np.ndarray
    controls: np.ndarray
    stage_costs: np.ndarray
    values: np.ndarray
    guess_violations: np.ndarray
    converged: bool
    convergence_eps: float

    @property
    def steps(self) -> int:
        return self.controls.shape[0]

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def check_dynamics(self, sys, tol: float = 1e-10) -> float:
        err = 0.0
        for t in range(self.steps):
            pred = sys.A @ self.states[t] + sys.B @ self.controls[t]
            err = max(err, float(np.max(np.abs(self.states[t + 1] - pred))))
        if err > tol:
            raise AssertionError(f"trace dynamics inconsistent by {err:.3e}")
        return err

    def to_csv(self, path) -> None:
        n = self.states.shape[1]
        m = self.controls.shape[1] if self.steps else 0
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["t"]
                + [f"x{i}" for i in range(n)]
                + [f"u{i}" for i in range(m)]
                + ["stage_cost", "value"]
            )
            for t in range(self.steps):
                writer.writerow(
                    [t]
                    + [repr(v) for v in self.states[t]]
                    + [repr(v) for v in self.controls[t]]
                    + [repr(self.stage_costs[t]), repr(self.values[t])]
                )


@dataclass
class CostSummary:
    """Accumulated closed-loop stage cost with a truncation-tail estimate."""

    total: float
    remainder_estimate: float


def run_closed_loop(
    cp: CondensedProblem,
    pair: SubspacePair,
    x_s,
    max_steps: int = 400,
    convergence_eps: float = 1e-6,
    X0: Optional[Polytope] = None,
    terminal_switch: bool = False,
    config: SolverConfig = DEFAULT_CONFIG,
) -> ClosedLoopTrace:
    """Closed loop of the reduced scheme: start from the zero guess, solve the
    reduced problem, apply the first control, shift the optimizer into the
    next guess.  States with norm below 1e-12 are snapped to the origin, which
    makes it exactly absorbing."""
    x = np.asarray(x_s, dtype=float).ravel()
    if X0 is not None and not X0.contains(x, GUESS_TOL):
        raise PreconditionViolated("x_s outside the initial set")
    sys, K, rep = cp.sys, cp.K, cp.admissible
    ztilde = np.zeros(cp.d)
    states = [x.copy()]
    controls, stage_costs, values, guess_viol = [], [], [], []
    converged = False
    for t in range(max_steps):
        if np.linalg.norm(x) <= convergence_eps:
            converged = True
            break
        if not cp.X.contains(x, 1e-8):
            raise DivergenceDetected(f"state left the constraint set at step {t}")
        guess_viol.append(rep.violation(x, ztilde))
        if terminal_switch and cp.term.Xf.contains(x, 0.0):
            u = cp.term.Kf @ x
            value = cp.term.terminal_cost(x)
            ztilde_next = np.zeros(cp.d)
        else:
            sol = solve_reduced(cp, pair, x, ztilde, config=config)
            u = K.K @ x + sol.z[: sys.m]
            value = sol.value
            ztilde_next = admissible_shift(cp, x, sol.z)
        x_next = sys.A @ x + sys.B @ u
        if np.linalg.norm(x_next) <= SNAP_TOL:
            x_next = np.zeros_like(x_next)
        controls.append(u)
        stage_costs.append(sys.stage_cost(x, u))
        values.append(value)
        states.append(x_next)
        x = x_next
        ztilde = ztilde_next
    else:
        converged = bool(np.linalg.norm(x) <= convergence_eps)
    return ClosedLoopTrace(
        states=np.asarray(states),
        controls=np.asarray(controls).reshape(len(controls), sys.m),
        stage_costs=np.asarray(stage_costs),
        values=np.asarray(values),
        guess_violations=np.asarray(guess_viol),
        converged=converged,
        convergence_eps=convergence_eps,
    )


def closed_loop_cost(trace: ClosedLoopTrace, term=None) -> CostSummary:
    """Sum of stage costs over a converged trace.

    The infinite tail beyond the recorded steps is estimated by the terminal
    cost at the final state (negligible at the default threshold); it is
    reported separately, never silently added.
    """
    if not trace.converged:
        raise NotConverged("trace did not reach the convergence threshold")
    total = float(np.sum(trace.stage_costs))
    xf = trace.final_state
    remainder = float(xf @ term.Pf @ xf) if term is not None else float("nan")
    return CostSummary(total=total, remainder_estimate=remainder)
