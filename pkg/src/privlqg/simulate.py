"""Monte Carlo closed-loop simulation of the synthesized architecture.

Per trial, the forward recursion is exactly

    Y_t     = C_t X_t + V_t
    Xhat_t  = (I - L_t C_t)(A_{t-1} Xhat_{t-1} + B_{t-1} U_{t-1}) + L_t Y_t
    U_t     = K_t Xhat_t
    X_{t+1} = A_t X_t + B_t U_t + W_t

with Xhat_1 predicted from the prior mean m1.  Noise draws come from the
pinned counter streams in rng: per trial, n gaussians for X_1, then for
each t the r_t gaussians of V_t followed by the n gaussians of W_t.
Trials are pure functions of (seed, trial index), hence order-independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import DimensionMismatch
from .linalg import chol_pd
from .model import validate


@dataclass(frozen=True)
class SimulationTrace:
    """One closed-loop rollout; x has T+1 rows, the rest T entries."""

    x: np.ndarray
    y: tuple
    u: np.ndarray
    xhat: np.ndarray
    seed: int
    realized_cost: float


@dataclass(frozen=True)
class MonteCarloSummary:
    trials: int
    mean_cost: float
    standard_error: float
    predicted_cost: float
    cost_consistent_3se: bool
    mean_squared_estimation_error: tuple
    estimation_covariance: tuple
    empirical_snr: tuple
    design_snr: tuple


def _noise_layout(design, instance):
    """Draw-count offsets: X_1 block, then (V_t, W_t) blocks per step."""
    n = instance.n
    offsets = []
    pos = n
    for C in design.C:
        r = C.shape[0]
        offsets.append((pos, r))  # V_t
        pos += r + n              # then W_t
    return offsets, pos


def _check_dims(design, instance):
    n = instance.n
    if design.K[0].shape[1] != n or design.plan.Pfilt[0].shape[0] != n:
        raise DimensionMismatch(
            "design state dimension does not match the instance"
        )
    if len(design.C) != instance.T:
        raise DimensionMismatch(
            f"design horizon {len(design.C)} != instance horizon {instance.T}"
        )


def simulate_once(design, instance, seed, trial=0):
    """Single rollout using the stream of (seed, trial)."""
    instance = validate(instance)
    _check_dims(design, instance)
    mdl, cost = instance.model, instance.cost
    T, n, m = mdl.T, mdl.n, mdl.m

    offsets, total = _noise_layout(design, instance)
    g = rng.gaussians(rng.trial_key(seed, trial), total)
    cholP10 = chol_pd(mdl.P10, "P10")
    cholW = [chol_pd(W, "SigmaW") for W in mdl.SigmaW]
    cholV = [
        chol_pd(V, "SigmaV") if V.shape[0] else np.zeros((0, 0))
        for V in design.SigmaV
    ]

    x = np.zeros((T + 1, n))
    xhat = np.zeros((T, n))
    u = np.zeros((T, m))
    ys = []

    x[0] = mdl.m1 + cholP10 @ g[:n]
    run_cost = 0.0
    for t in range(T):
        off, r = offsets[t]
        v = cholV[t] @ g[off:off + r]
        y = design.C[t] @ x[t] + v
        if t == 0:
            pred = mdl.m1.copy()
        else:
            pred = mdl.A[t - 1] @ xhat[t - 1] + mdl.B[t - 1] @ u[t - 1]
        if r:
            xhat[t] = pred + design.L[t] @ (y - design.C[t] @ pred)
        else:
            xhat[t] = pred
        u[t] = design.K[t] @ xhat[t]
        w = cholW[t] @ g[off + r:off + r + n]
        x[t + 1] = mdl.A[t] @ x[t] + mdl.B[t] @ u[t] + w
        run_cost += float(x[t + 1] @ cost.Q[t] @ x[t + 1] + u[t] @ cost.R[t] @ u[t])
        ys.append(y)

    return SimulationTrace(x=x, y=tuple(ys), u=u, xhat=xhat, seed=int(seed),
                           realized_cost=run_cost)


def predicted_mean_cost(problem, plan):
    """SDP cost prediction sum trace(Theta_t P_{t|t}) + c2 + m1' Phi_1 m1.

    The mean-regulation term is always included here because simulation
    physically incurs it, regardless of how the budget was configured.
    """
    mdl = problem.instance.model
    mean_term = float(mdl.m1 @ problem.riccati.Phi[0] @ mdl.m1)
    used = sum(
        float(np.trace(th @ P)) for th, P in zip(problem.Theta, plan.Pfilt)
    )
    return used + problem.c2 + mean_term


def monte_carlo(design, instance, trials, base_seed, problem=None):
    """Vectorized trials; summary statistics plus the 3-SE cost verdict."""
    instance = validate(instance)
    _check_dims(design, instance)
    if trials < 2:
        raise DimensionMismatch(f"trials must be >= 2, got {trials}")
    mdl, cost = instance.model, instance.cost
    T, n, m = mdl.T, mdl.n, mdl.m

    offsets, total = _noise_layout(design, instance)
    g = rng.gaussian_matrix(base_seed, trials, total)

    cholP10 = chol_pd(mdl.P10, "P10")
    X = mdl.m1[None, :] + g[:, :n] @ cholP10.T
    xhat_prev = None
    u_prev = None
    run_cost = np.zeros(trials)
    mse = []
    est_cov = []
    emp_snr = []
    des_snr = []

    for t in range(T):
        off, r = offsets[t]
        Ct, Vt, Lt = design.C[t], design.SigmaV[t], design.L[t]
        if t == 0:
            pred = np.repeat(mdl.m1[None, :], trials, axis=0)
        else:
            pred = xhat_prev @ mdl.A[t - 1].T + u_prev @ mdl.B[t - 1].T
        if r:
            V = g[:, off:off + r] @ chol_pd(Vt, "SigmaV").T
            Y = X @ Ct.T + V
            xhat = pred + (Y - pred @ Ct.T) @ Lt.T
        else:
            xhat = pred
        U = xhat @ design.K[t].T
        W = g[:, off + r:off + r + n] @ chol_pd(mdl.SigmaW[t], "SigmaW").T
        Xn = X @ mdl.A[t].T + U @ mdl.B[t].T + W

        run_cost += np.einsum("ij,jk,ik->i", Xn, cost.Q[t], Xn)
        run_cost += np.einsum("ij,jk,ik->i", U, cost.R[t], U)

        err = X - xhat
        mse.append(float(np.mean(np.sum(err * err, axis=1))))
        est_cov.append((err.T @ err) / trials)

        if r:
            sig_cov = np.cov(X, rowvar=False).reshape(n, n)
            emp_snr.append(
                float(np.trace(Ct @ sig_cov @ Ct.T) / np.trace(Vt))
            )
            des_snr.append(float(np.trace(Ct @ Ct.T) / np.trace(Vt)))
        else:
            emp_snr.append(0.0)
            des_snr.append(0.0)

        X, xhat_prev, u_prev = Xn, xhat, U

    mean_cost = float(np.mean(run_cost))
    se = float(np.std(run_cost, ddof=1) / np.sqrt(trials))

    predicted = float("nan")
    consistent = True
    if problem is not None:
        predicted = predicted_mean_cost(problem, design.plan)
        consistent = bool(abs(mean_cost - predicted) <= 3.0 * se)

    return MonteCarloSummary(
        trials=int(trials),
        mean_cost=mean_cost,
        standard_error=se,
        predicted_cost=predicted,
        cost_consistent_3se=consistent,
        mean_squared_estimation_error=tuple(mse),
        estimation_covariance=tuple(est_cov),
        empirical_snr=tuple(emp_snr),
        design_snr=tuple(des_snr),
    )


def trace_to_csv_rows(trace):
    """Rows (t, x, xhat, u, y) per step, blank-padded; final row carries
    only the terminal state."""
    T, n = trace.xhat.shape
    m = trace.u.shape[1]
    rmax = max((y.shape[0] for y in trace.y), default=0)
    header = (
        ["t"]
        + [f"x{i + 1}" for i in range(n)]
        + [f"xhat{i + 1}" for i in range(n)]
        + [f"u{i + 1}" for i in range(m)]
        + [f"y{i + 1}" for i in range(rmax)]
    )
    rows = [header]
    for t in range(T):
        row = [str(t + 1)]
        row += [_fmt(v) for v in trace.x[t]]
        row += [_fmt(v) for v in trace.xhat[t]]
        row += [_fmt(v) for v in trace.u[t]]
        ys = [_fmt(v) for v in trace.y[t]]
        row += ys + [""] * (rmax - len(ys))
        rows.append(row)
    final = [str(T + 1)] + [_fmt(v) for v in trace.x[T]]
    final += [""] * (len(header) - len(final))
    rows.append(final)
    return rows


def _fmt(v):
    return f"{float(v):.17g}"
