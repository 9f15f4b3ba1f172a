"""Operator-splitting solver for the fused, entrywise-penalized covariance fit.

The objective being minimized over paths {Theta_t} with Theta_t >= eps*I is

    sum_t ||X_t X_t' - Theta_t||_F^2 / (2T)
    + lambda1 * sum_t sum_{u != v} xi1[t,u,v] * |Theta[t,u,v]|
    + lambda2 * sum_{t>=2} xi2[t] * ||Theta_t - Theta_{t-1}||_F.

The splitting introduces a projected copy V_t of Theta_t, an off-diagonal
copy Upsilon_t, and a first-difference block D_t, each with its own
multiplier (A_t, Y_t, Z_t).  All subproblem updates are closed-form; the
Theta update reduces to p(p+1)/2 independent tridiagonal solves.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from .core import (
    ObservationSeries,
    PenaltySpec,
    WeightSet,
    offdiag,
    project_psd,
    sym,
)


@dataclass
class AdmmState:
    """All primal and dual blocks of the splitting.

    Shapes: ``theta``, ``v``, ``upsilon``, ``a``, ``y`` are (T, p, p);
    ``d`` and ``z`` are (T - 1, p, p), row i holding the block for time
    t = i + 2.  Boundary blocks Z_1 = Z_{T+1} = D_1 = D_{T+1} = 0 are
    implicit and never stored.
    """

    theta: np.ndarray
    v: np.ndarray
    upsilon: np.ndarray
    d: np.ndarray
    a: np.ndarray
    y: np.ndarray
    z: np.ndarray
    iteration: int = 0


@dataclass
class SolveReport:
    iterations: int
    terminated_by: str
    final_gap: float
    final_dfeas: float
    primal_objective: float
    dual_objective: float
    wall_time: float
    primal_history: list = field(default_factory=list)
    dual_history: list = field(default_factory=list)


@dataclass
class AdmmResult:
    """Converged path plus the auxiliary blocks carrying exact zeros.

    ``state`` holds the full final iterate, duals included, for external
    verification of the termination quantities.
    """

    theta: np.ndarray
    d: np.ndarray
    upsilon: np.ndarray
    v: np.ndarray
    report: SolveReport
    state: "AdmmState" = None


def initialize(data: ObservationSeries, spec: PenaltySpec) -> AdmmState:
    """Start from the unpenalized fit Theta_t = X_t X_t' with zero duals."""
    s = data.outer_products()
    theta = sym(s)
    v = project_psd(theta, spec.epsilon)
    upsilon = offdiag(theta)
    d = theta[1:] - theta[:-1]
    zeros = np.zeros_like(theta)
    return AdmmState(
        theta=theta,
        v=v,
        upsilon=upsilon,
        d=d,
        a=zeros.copy(),
        y=zeros.copy(),
        z=np.zeros_like(d),
    )


def build_psi(state: AdmmState, data: ObservationSeries, beta: float) -> np.ndarray:
    """Right-hand side of the Theta-update linear system, one matrix per t."""
    T, p = data.T, data.p
    s = data.outer_products()
    zpad = np.zeros((T + 1, p, p))
    dpad = np.zeros((T + 1, p, p))
    if T > 1:
        zpad[1:T] = state.z
        dpad[1:T] = state.d
    return (
        s / T
        + state.a
        + state.y
        + zpad[:T]
        - zpad[1:]
        + beta * (state.v + state.upsilon + dpad[:T] - dpad[1:])
    )


def _tridiag_factors(T: int, beta: float):
    """Banded Cholesky factors of the two coordinate systems.

    Both systems share the off-diagonal -beta; the diagonal differs by
    beta between off-diagonal coordinates (u != v) and diagonal ones
    (u == v).  Strict diagonal dominance (margin 1/T) makes both SPD.
    """
    factors = {}
    for key, b, c in (
        ("off", 3.0 * beta + 1.0 / T, 4.0 * beta + 1.0 / T),
        ("diag", 2.0 * beta + 1.0 / T, 3.0 * beta + 1.0 / T),
    ):
        ab = np.zeros((2, T))
        ab[1, :] = c
        ab[1, 0] = b
        ab[1, -1] = b
        ab[0, 1:] = -beta
        factors[key] = cholesky_banded(ab, lower=False)
    return factors


def solve_theta_block(psi: np.ndarray, beta: float, T: int, factors=None) -> np.ndarray:
    """Solve the Theta-update system coordinate-by-coordinate.

    ``psi`` has shape (T, p, p).  Each of the p(p+1)/2 coordinate systems
    is tridiagonal with constant coefficients, so one banded solve per
    coordinate class (diagonal / off-diagonal) handles all of them.
    """
    psi = np.asarray(psi, dtype=float)
    p = psi.shape[1]
    if factors is None:
        factors = _tridiag_factors(T, beta)
    theta = np.zeros_like(psi)

    idx = np.arange(p)
    diag_rhs = psi[:, idx, idx]
    theta[:, idx, idx] = cho_solve_banded((factors["diag"], False), diag_rhs)

    if p > 1:
        iu, iv = np.triu_indices(p, k=1)
        off_rhs = psi[:, iu, iv]
        sol = cho_solve_banded((factors["off"], False), off_rhs)
        theta[:, iu, iv] = sol
        theta[:, iv, iu] = sol
    return theta


def soft_threshold(x, tau):
    """sgn(x) * (|x| - tau)_+, elementwise; exact zeros in the dead zone."""
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


def update_upsilon(
    theta_new: np.ndarray,
    y: np.ndarray,
    weights: WeightSet,
    lambda1: float,
    beta: float,
) -> np.ndarray:
    """Entrywise shrinkage of the off-diagonal copy; diagonal stays zero."""
    ups = soft_threshold(theta_new - y / beta, lambda1 * weights.xi1 / beta)
    return offdiag(ups)


def group_shrink(xi_mat: np.ndarray, tau: float) -> np.ndarray:
    """Frobenius-ball shrinkage (1 - tau/||M||)_+ M; zero inside the ball."""
    norm = np.sqrt(np.sum(np.asarray(xi_mat, dtype=float) ** 2))
    if norm <= tau:
        return np.zeros_like(xi_mat)
    return (1.0 - tau / norm) * xi_mat


def update_d(
    theta_new: np.ndarray,
    z: np.ndarray,
    weights: WeightSet,
    lambda2: float,
    beta: float,
) -> np.ndarray:
    """Group shrinkage of every first difference, t = 2..T."""
    xi = theta_new[1:] - theta_new[:-1] - z / beta
    norms = np.sqrt(np.sum(xi**2, axis=(1, 2)))
    tau = lambda2 * weights.xi2 / beta
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(norms > tau, 1.0 - tau / np.maximum(norms, 1e-300), 0.0)
    return factor[:, None, None] * xi


def dual_ascent(
    state: AdmmState,
    theta_new: np.ndarray,
    v_new: np.ndarray,
    upsilon_new: np.ndarray,
    d_new: np.ndarray,
    beta: float,
    gamma: float,
):
    """Scaled multiplier updates; returns (a, y, z)."""
    step = gamma * beta
    a = state.a - step * (theta_new - v_new)
    y = state.y - step * (offdiag(theta_new) - upsilon_new)
    if theta_new.shape[0] > 1:
        z = state.z - step * (theta_new[1:] - theta_new[:-1] - d_new)
    else:
        z = state.z
    return a, y, z


def primal_objective(
    theta: np.ndarray,
    data: ObservationSeries,
    weights: WeightSet,
    lambda1: float,
    lambda2: float,
) -> float:
    """Objective value of the penalized least-squares criterion at ``theta``."""
    s = data.outer_products()
    fit = np.sum((s - theta) ** 2) / (2.0 * data.T)
    l1 = lambda1 * np.sum(weights.xi1 * np.abs(theta))
    if data.T > 1:
        diffs = theta[1:] - theta[:-1]
        fuse = lambda2 * np.sum(weights.xi2 * np.sqrt(np.sum(diffs**2, axis=(1, 2))))
    else:
        fuse = 0.0
    return float(fit + l1 + fuse)


def dual_objective_and_feasibility(
    state: AdmmState,
    data: ObservationSeries,
    weights: WeightSet,
    lambda1: float,
    lambda2: float,
    epsilon: float,
):
    """Dual objective value and the scaled dual-constraint violation.

    The least-squares dual block is recovered from the current primal
    iterate as W_t = (Theta_t - X_t X_t') / T.  Violations measured:
    negative part of the smallest eigenvalue of each residual matrix
    Delta_t (cone constraint), excess of ||Z_t||_F over its ball radius,
    and excess of |Y[t,u,v]| over its box bound.
    """
    T, p = data.T, data.p
    s = data.outer_products()
    w = (state.theta - s) / T
    zpad = np.zeros((T + 1, p, p))
    if T > 1:
        zpad[1:T] = state.z
    delta = zpad[1:] - zpad[:T] + w - offdiag(state.y)

    trace_delta = np.trace(delta, axis1=1, axis2=2).sum()
    dual_value = float(
        -(T / 2.0) * np.sum(w**2) - np.sum(w * s) + epsilon * trace_delta
    )

    eigmin = np.linalg.eigvalsh(sym(delta))[:, 0]
    delta_norms = np.sqrt(np.sum(delta**2, axis=(1, 2)))
    dfeas1 = float(np.max(np.abs(np.minimum(eigmin, 0.0)) / (1.0 + delta_norms)))

    if T > 1:
        z_norms = np.sqrt(np.sum(state.z**2, axis=(1, 2)))
        excess = np.maximum(z_norms - lambda2 * weights.xi2, 0.0)
        dfeas2 = float(np.max(excess) / (1.0 + np.max(z_norms)))
    else:
        dfeas2 = 0.0

    if p > 1:
        mask = ~np.eye(p, dtype=bool)
        yabs = np.abs(state.y[:, mask])
        box = lambda1 * weights.xi1[:, mask]
        dfeas3 = float(np.max(np.maximum(yabs - box, 0.0)) / (1.0 + np.max(yabs)))
    else:
        dfeas3 = 0.0

    return dual_value, max(dfeas1, dfeas2, dfeas3)


def _stacked_norm(blocks: np.ndarray) -> float:
    return float(np.sqrt(np.sum(blocks**2)))


def _relative_change(new: np.ndarray, old: np.ndarray) -> float:
    return _stacked_norm(new - old) / (1.0 + _stacked_norm(new) + _stacked_norm(old))


def check_termination(gap: float, dfeas: float, tol: float, prev_blocks=None, curr_blocks=None) -> str:
    """Decide {continue, T1, T2}.

    T1: near primal-dual optimality, max(gap, dfeas) <= tol.
    T2: stagnation safeguard on the relative successive changes of the
    Theta, A, Y, Z blocks, threshold tol / 1000.  Requires two iterates.
    """
    if max(gap, dfeas) <= tol:
        return "T1"
    if prev_blocks is not None and curr_blocks is not None:
        ratios = [
            _relative_change(curr, prev)
            for curr, prev in zip(curr_blocks, prev_blocks)
            if curr.size
        ]
        if ratios and max(ratios) <= tol / 1e3:
            return "T2"
    return "continue"


def admm_solve(
    data: ObservationSeries,
    spec: PenaltySpec,
    weights: WeightSet,
    tol: float = 1e-3,
    max_iter: int = 20000,
    gap_stride: int = 1,
    keep_history: bool = True,
) -> AdmmResult:
    """Run the splitting to termination.

    ``gap_stride`` controls how often the gap/feasibility check runs;
    the default checks every iteration.  Raises ``FloatingPointError``
    on a non-finite iterate; hitting ``max_iter`` is reported, not fatal.
    """
    t0 = time.perf_counter()
    T, p = data.T, data.p
    beta, gamma, eps = spec.beta, spec.gamma, spec.epsilon
    state = initialize(data, spec)
    factors = _tridiag_factors(T, beta)
    s = data.outer_products()
    s_over_t = s / T

    zpad = np.zeros((T + 1, p, p))
    dpad = np.zeros((T + 1, p, p))

    prev_blocks = None
    report = SolveReport(
        iterations=0,
        terminated_by="max_iter",
        final_gap=np.inf,
        final_dfeas=np.inf,
        primal_objective=np.nan,
        dual_objective=np.nan,
        wall_time=0.0,
    )

    for k in range(1, max_iter + 1):
        if T > 1:
            zpad[1:T] = state.z
            dpad[1:T] = state.d
        psi = (
            s_over_t
            + state.a
            + state.y
            + zpad[:T]
            - zpad[1:]
            + beta * (state.v + state.upsilon + dpad[:T] - dpad[1:])
        )
        theta = solve_theta_block(psi, beta, T, factors=factors)
        v = project_psd(theta - state.a / beta, eps)
        upsilon = update_upsilon(theta, state.y, weights, spec.lambda1, beta)
        d = update_d(theta, state.z, weights, spec.lambda2, beta) if T > 1 else state.d
        a, y, z = dual_ascent(state, theta, v, upsilon, d, beta, gamma)

        state.theta, state.v, state.upsilon, state.d = theta, v, upsilon, d
        state.a, state.y, state.z = a, y, z
        state.iteration = k

        if k % gap_stride == 0 or k == max_iter:
            v_p = primal_objective(theta, data, weights, spec.lambda1, spec.lambda2)
            v_d, dfeas = dual_objective_and_feasibility(
                state, data, weights, spec.lambda1, spec.lambda2, eps
            )
            if not (np.isfinite(v_p) and np.isfinite(v_d)):
                raise FloatingPointError(
                    "non-finite iterate: check the penalty parameter and data scale"
                )
            gap = abs(v_p - v_d) / (1.0 + abs(v_p) + abs(v_d))
            if keep_history:
                report.primal_history.append(v_p)
                report.dual_history.append(v_d)
            report.final_gap = gap
            report.final_dfeas = dfeas
            report.primal_objective = v_p
            report.dual_objective = v_d
            report.iterations = k

            curr_blocks = (theta, a, y, z)
            decision = check_termination(gap, dfeas, tol, prev_blocks, curr_blocks)
            if decision != "continue":
                report.terminated_by = decision
                break
            prev_blocks = tuple(b.copy() for b in curr_blocks)

    report.wall_time = time.perf_counter() - t0
    return AdmmResult(
        theta=state.theta,
        d=state.d,
        upsilon=state.upsilon,
        v=state.v,
        report=report,
        state=state,
    )
