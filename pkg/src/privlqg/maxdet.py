"""Determinant-maximization step: covariance plan under LMI constraints.

Minimizes  1/2 sum_t logdet Pi_t^-1 + c1  over P_{t|t} > 0, Pi_t > 0
subject to

    sum_t trace(Theta_t P_{t|t}) + c2 <= D
    P_{1|1} <= P_{1|0},   P_{T|T} = Pi_T
    P_{t+1|t+1} <= A_t P_{t|t} A_t' + SigmaW_t
    [[P_{t|t} - Pi_t,  P_{t|t} A_t'], [A_t P_{t|t},  A_t P_{t|t} A_t' + SigmaW_t]] >= 0

with  c1 = 1/2 logdet P_{1|0} + 1/2 sum_{t<T} logdet SigmaW_t  and
c2 = trace(Phi_1 P_{1|0}) + sum_t trace(SigmaW_t S_t)  (natural logs; bits
only at reporting boundaries).

Solver
------
Because logdet is matrix-monotone, the block LMI pins Pi_t at its Schur
complement upper bound at any optimum,

    Pi_t = (P_{t|t}^-1 + A_t'(SigmaW_t)^-1 A_t)^-1   (t < T),  Pi_T = P_{T|T},

so both Pi eliminations are exact and the program reduces to a convex
problem over {P_{t|t}} alone:

    minimize  1/2 sum_{t<T} logdet(P_{t|t}^-1 + A_t'W_t^-1 A_t)
              - 1/2 logdet P_{T|T}
    s.t.      trace budget, prior/predictor dominance, P_{t|t} > 0.

That problem is solved by a feasible-start log-barrier interior-point
method (damped Newton centering, geometric multiplier updates).  The
zero-information recursion P1 = P_{1|0}, P_{t+1} = A_t P_t A_t' + W_t is
optimal in closed form whenever its budget is affordable; otherwise a
scaled copy of it is strictly feasible and seeds the barrier method, so
no phase-1 program is ever needed.  D <= c2 is certified infeasible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import Infeasible, MaxIterations, NumericalBreakdown
from .linalg import (
    inv_pd,
    kron_form,
    logdet_pd,
    sandwich_form,
    smat,
    spectral_scale,
    svec,
    svec_dim,
    symmetrize,
)
from .model import validate
from .riccati import backward_riccati


@dataclass(frozen=True)
class MaxDetProblem:
    """Assembled program data: constants, weights, and the trace budget D."""

    instance: object
    riccati: object
    Theta: tuple
    c1: float
    c2: float
    D: float

    @property
    def budget(self):
        """Slack available to the trace term: D - c2."""
        return self.D - self.c2


@dataclass(frozen=True)
class SolverTolerances:
    rel_gap: float = 1e-8
    abs_gap: float = 1e-9
    feasibility: float = 1e-8
    newton_decrement: float = 1e-10
    multiplier: float = 20.0
    tau0: float = 1.0
    max_outer: int = 80
    max_newton_total: int = 4000
    max_backtracks: int = 80


@dataclass(frozen=True)
class SolverStats:
    status: str = "optimal"
    outer_iterations: int = 0
    newton_iterations: int = 0
    gap_bound: float = 0.0
    budget_residual: float = 0.0


@dataclass(frozen=True)
class CovariancePlan:
    """Optimal filtered/one-step covariances and the objective in nats."""

    Pfilt: tuple
    Pi: tuple
    Ppred: tuple
    objective_nats: float
    solver_stats: SolverStats


def build_problem(instance, riccati=None):
    """Compute c1, c2, Theta and the effective budget D for an instance.

    D starts from CostSpec.delta, gains c2 when delta is read net of the
    constants, and loses m1' Phi_1 m1 when the mean-regulation cost counts
    against the budget.
    """
    instance = validate(instance)
    if riccati is None:
        riccati = backward_riccati(instance)
    mdl, cost = instance.model, instance.cost
    T = mdl.T

    c1 = 0.5 * logdet_pd(mdl.P10, "P10")
    for t in range(T - 1):
        c1 += 0.5 * logdet_pd(mdl.SigmaW[t], f"SigmaW[{t + 1}]")

    c2 = float(np.trace(riccati.Phi[0] @ mdl.P10))
    for t in range(T):
        c2 += float(np.trace(mdl.SigmaW[t] @ riccati.S[t]))

    D = cost.delta
    if cost.delta_net_of_constants:
        D += c2
    if cost.include_mean_cost:
        D -= float(mdl.m1 @ riccati.Phi[0] @ mdl.m1)

    return MaxDetProblem(instance=instance, riccati=riccati,
                         Theta=riccati.Theta, c1=c1, c2=c2, D=D)


def zero_information_plan(instance):
    """Closed-form recursion with no measurements: P1 = P10, P_{t+1} = A P A' + W."""
    instance = validate(instance)
    mdl = instance.model
    P = [mdl.P10.copy()]
    for t in range(mdl.T - 1):
        P.append(symmetrize(mdl.A[t] @ P[t] @ mdl.A[t].T + mdl.SigmaW[t]))
    return P


def predictor_sequence(instance, Pfilt):
    """P_{1|0} followed by P_{t+1|t} = A_t P_{t|t} A_t' + SigmaW_t."""
    mdl = instance.model
    pred = [mdl.P10.copy()]
    for t in range(mdl.T - 1):
        pred.append(symmetrize(mdl.A[t] @ Pfilt[t] @ mdl.A[t].T + mdl.SigmaW[t]))
    return pred


def tight_pi(instance, Pfilt):
    """Pi_t = (P_{t|t}^-1 + A_t' W_t^-1 A_t)^-1 for t < T, Pi_T = P_{T|T}."""
    mdl = instance.model
    T = mdl.T
    Pi = []
    for t in range(T - 1):
        Ct = mdl.A[t].T @ inv_pd(mdl.SigmaW[t]) @ mdl.A[t]
        Pi.append(symmetrize(inv_pd(symmetrize(inv_pd(Pfilt[t]) + Ct))))
    Pi.append(Pfilt[T - 1].copy())
    return Pi


def objective_from_pi(problem, Pi):
    """1/2 sum logdet Pi_t^-1 + c1, the program objective in nats."""
    total = problem.c1
    for t, P in enumerate(Pi):
        total -= 0.5 * logdet_pd(P, f"Pi[{t + 1}]")
    return total


def directed_info_nats(Ppred, Pfilt):
    """1/2 sum_t (logdet P_{t|t-1} - logdet P_{t|t})."""
    return 0.5 * sum(
        logdet_pd(pred) - logdet_pd(filt) for pred, filt in zip(Ppred, Pfilt)
    )


class _Barrier:
    """Value / gradient / Hessian of tau * F + Phi in svec coordinates.

    Everything is batched over the time axis: matrices live in stacked
    (T, n, n) arrays and derivatives are assembled from batched symmetric
    Kronecker blocks, so per-iteration cost does not degenerate into
    per-step Python overhead.
    """

    def __init__(self, problem):
        inst = problem.instance
        mdl = inst.model
        self.T = mdl.T
        self.n = mdl.n
        self.q = svec_dim(self.n)
        self.A = np.stack(mdl.A[: self.T - 1]) if self.T > 1 else \
            np.zeros((0, self.n, self.n))
        self.W = np.stack(mdl.SigmaW[: self.T - 1]) if self.T > 1 else \
            np.zeros((0, self.n, self.n))
        self.P10 = mdl.P10
        self.Theta = np.stack(problem.Theta)
        self.budget = problem.budget
        # information weights A' W^-1 A for the eliminated Pi blocks
        if self.T > 1:
            Winv = np.linalg.inv(self.W)
            self.C = _sym_batch(
                np.matmul(self.A.transpose(0, 2, 1), np.matmul(Winv, self.A))
            )
        else:
            self.C = np.zeros((0, self.n, self.n))
        self.theta_vec = linalg.svec_batch(self.Theta).reshape(-1)
        self.eye = np.eye(self.n)
        # barrier parameter: 1 scalar + n for the prior LMI + n per predictor
        # LMI + n per P_t > 0 cone
        self.nu = 1.0 + self.n * (2 * self.T)

    # -- packing ----------------------------------------------------------
    def pack(self, Ps):
        return linalg.svec_batch(np.asarray(Ps)).reshape(-1)

    def unpack(self, x):
        return linalg.smat_batch(x.reshape(self.T, self.q), self.n)

    # -- feasibility ------------------------------------------------------
    def slacks(self, Ps):
        s = self.budget - float(np.einsum("tij,tij->", self.Theta, Ps))
        G0 = symmetrize(self.P10 - Ps[0])
        if self.T > 1:
            G = _sym_batch(
                np.matmul(self.A, np.matmul(Ps[:-1], self.A.transpose(0, 2, 1)))
                + self.W - Ps[1:]
            )
        else:
            G = np.zeros((0, self.n, self.n))
        return s, G0, G

    def feasible(self, Ps):
        s, G0, G = self.slacks(Ps)
        if not s > 0:
            return False
        stack = np.concatenate([Ps, G0[None], G], axis=0)
        # strict-positivity floor: eigenvalues >= 1e-10 * scale estimate
        floors = 1e-10 * (1.0 + np.abs(stack).max(axis=(1, 2)))
        try:
            np.linalg.cholesky(stack - floors[:, None, None] * self.eye)
        except np.linalg.LinAlgError:
            return False
        return True

    # -- objective F ------------------------------------------------------
    def objective(self, Ps):
        val = -0.5 * float(logdet_pd(Ps[-1]))
        if self.T > 1:
            M = _sym_batch(np.linalg.inv(Ps[:-1]) + self.C)
            val += 0.5 * float(np.sum(linalg.logdet_pd_batch(M)))
        return val

    def value(self, x, tau):
        Ps = self.unpack(x)
        s, G0, G = self.slacks(Ps)
        val = tau * self.objective(Ps)
        val -= np.log(s) + logdet_pd(G0)
        val -= float(np.sum(linalg.logdet_pd_batch(G)))
        val -= float(np.sum(linalg.logdet_pd_batch(Ps)))
        return val

    def grad_hess(self, x, tau):
        T, q, n = self.T, self.q, self.n
        Ps = self.unpack(x)
        s, G0, G = self.slacks(Ps)

        grad = np.zeros((T, q))
        Hdiag = np.zeros((T, q, q))
        Hoff = np.zeros((max(T - 1, 0), q, q))  # block (t, t+1)

        Pinv = _sym_batch(np.linalg.inv(Ps))

        # objective: 1/2 logdet(Pinv_t + C_t) for t < T, -1/2 logdet P_T
        if T > 1:
            M = _sym_batch(Pinv[:-1] + self.C)
            Pi = _sym_batch(np.linalg.inv(M))
            E = _sym_batch(np.matmul(Pinv[:-1], np.matmul(Pi, Pinv[:-1])))
            grad[:-1] += tau * (-0.5) * linalg.svec_batch(E)
            Hdiag[:-1] += tau * (
                -0.5 * linalg.kron_form_batch(E, E)
                + linalg.kron_form_batch(E, Pinv[:-1])
            )
        grad[-1] += tau * (-0.5) * svec(Pinv[-1])
        Hdiag[-1] += tau * 0.5 * kron_form(Pinv[-1], Pinv[-1])

        # cone barriers on P_t
        grad -= linalg.svec_batch(Pinv)
        Hdiag += linalg.kron_form_batch(Pinv, Pinv)

        # prior dominance barrier
        G0inv = symmetrize(inv_pd(G0))
        grad[0] += svec(G0inv)
        Hdiag[0] += kron_form(G0inv, G0inv)

        # predictor dominance barriers
        if T > 1:
            Ginv = _sym_batch(np.linalg.inv(G))
            AGA = _sym_batch(
                np.matmul(self.A.transpose(0, 2, 1), np.matmul(Ginv, self.A))
            )
            grad[:-1] -= linalg.svec_batch(AGA)
            grad[1:] += linalg.svec_batch(Ginv)
            Hdiag[:-1] += linalg.kron_form_batch(AGA, AGA)
            Hdiag[1:] += linalg.kron_form_batch(Ginv, Ginv)
            # cross blocks: -(map dP_t -> Ginv A dP_t A' Ginv) in (t+1, t)
            Hoff[:] = -linalg.sandwich_form_batch(
                np.matmul(Ginv, self.A)
            ).transpose(0, 2, 1)

        g = grad.reshape(-1)
        H = np.zeros((T * q, T * q))
        for t in range(T):
            H[t * q:(t + 1) * q, t * q:(t + 1) * q] = Hdiag[t]
        for t in range(T - 1):
            H[t * q:(t + 1) * q, (t + 1) * q:(t + 2) * q] = Hoff[t]
            H[(t + 1) * q:(t + 2) * q, t * q:(t + 1) * q] = Hoff[t].T

        # budget barrier
        g += self.theta_vec / s
        H += np.outer(self.theta_vec, self.theta_vec) / (s * s)

        return g, H


def _sym_batch(M):
    return 0.5 * (M + M.transpose(0, 2, 1))


def _newton_direction(H, g):
    diag_scale = float(np.mean(np.diag(H)))
    for jitter in (0.0, 1e-14, 1e-11, 1e-8):
        try:
            L = np.linalg.cholesky(
                H + jitter * max(diag_scale, 1.0) * np.eye(H.shape[0])
            )
        except np.linalg.LinAlgError:
            continue
        y = np.linalg.solve(L, -g)
        return np.linalg.solve(L.T, y)
    raise NumericalBreakdown("Newton system is not positive definite")


def solve(problem, tol=None):
    """Solve the covariance program to the requested optimality gap.

    Returns a CovariancePlan; deterministic for identical inputs and
    tolerances.  Raises Infeasible when D <= c2 (with a certificate
    explanation), MaxIterations on non-convergence, NumericalBreakdown if
    factorizations fail irrecoverably.
    """
    tol = tol or SolverTolerances()
    inst = problem.instance
    bud = problem.budget

    zero_plan = zero_information_plan(inst)
    zero_cost = sum(
        float(np.trace(th @ P)) for th, P in zip(problem.Theta, zero_plan)
    )

    if bud >= zero_cost - 1e-12 * (1.0 + abs(zero_cost)):
        # no information needs to be disclosed; the closed-form plan is optimal
        return _finalize(problem, zero_plan,
                         SolverStats(status="zero-information"))

    if bud <= 0:
        theta_norm = max(float(np.abs(th).max()) for th in problem.Theta)
        raise Infeasible(
            "budget below irreducible cost: D - c2 = "
            f"{bud:.6g} <= 0 while sum_t trace(Theta_t P_t) is strictly "
            f"positive for every P > 0 (max|Theta| = {theta_norm:.6g}); "
            f"D = {problem.D:.6g}, c2 = {problem.c2:.6g}"
        )

    barrier = _Barrier(problem)

    # strictly feasible start: shrink the zero-information plan toward the
    # interior, then scale it until the budget has slack
    shrink = 0.99
    alpha = min(1.0, 0.9 * bud / (shrink * zero_cost))
    Ps = alpha * shrink * np.stack(zero_plan)
    if not barrier.feasible(Ps):
        raise NumericalBreakdown("constructed starting point is infeasible")

    x = barrier.pack(Ps)
    tau = tol.tau0
    newton_total = 0
    outer = 0
    gap = np.inf

    while True:
        outer += 1
        if outer > tol.max_outer:
            raise MaxIterations(
                f"outer iteration cap {tol.max_outer} reached "
                f"(gap bound {gap:.3e})"
            )
        # center at this tau
        for _ in range(200):
            newton_total += 1
            if newton_total > tol.max_newton_total:
                raise MaxIterations(
                    f"Newton iteration cap {tol.max_newton_total} reached "
                    f"(gap bound {gap:.3e})"
                )
            g, H = barrier.grad_hess(x, tau)
            if not np.all(np.isfinite(g)) or not np.all(np.isfinite(H)):
                raise NumericalBreakdown("non-finite derivative encountered")
            step = _newton_direction(H, g)
            decrement2 = float(-g @ step)
            if decrement2 / 2.0 <= tol.newton_decrement:
                break
            # backtracking line search, strict feasibility first
            base = barrier.value(x, tau)
            t_step = 1.0
            accepted = False
            for _ in range(tol.max_backtracks):
                cand = x + t_step * step
                if barrier.feasible(barrier.unpack(cand)):
                    if barrier.value(cand, tau) <= base - 0.01 * t_step * decrement2:
                        x = cand
                        accepted = True
                        break
                t_step *= 0.5
            if not accepted:
                # descent stalled at line-search resolution; treat as centered
                break

        gap = 2.0 * barrier.nu / tau
        obj_now = barrier.objective(barrier.unpack(x)) + problem.c1
        target = max(tol.abs_gap, tol.rel_gap * max(1.0, abs(obj_now)))
        if gap <= target:
            break
        tau *= tol.multiplier

    Ps = [symmetrize(P) for P in barrier.unpack(x)]
    stats = SolverStats(status="optimal", outer_iterations=outer,
                        newton_iterations=newton_total, gap_bound=gap)
    return _finalize(problem, Ps, stats)


def _finalize(problem, Pfilt, stats):
    inst = problem.instance
    Pi = tight_pi(inst, Pfilt)
    Ppred = predictor_sequence(inst, Pfilt)
    objective = objective_from_pi(problem, Pi)
    used = sum(
        float(np.trace(th @ P)) for th, P in zip(problem.Theta, Pfilt)
    ) + problem.c2
    stats = SolverStats(
        status=stats.status,
        outer_iterations=stats.outer_iterations,
        newton_iterations=stats.newton_iterations,
        gap_bound=stats.gap_bound,
        budget_residual=used - problem.D,
    )
    return CovariancePlan(
        Pfilt=tuple(Pfilt),
        Pi=tuple(Pi),
        Ppred=tuple(Ppred),
        objective_nats=objective,
        solver_stats=stats,
    )


# ---------------------------------------------------------------------------
# Independent certificate audit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    residual: float
    tolerance: float


@dataclass(frozen=True)
class CertificateReport:
    checks: tuple

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def failing(self):
        return [c.name for c in self.checks if not c.passed]

    def __str__(self):
        lines = []
        for c in self.checks:
            flag = "PASS" if c.passed else "FAIL"
            lines.append(
                f"{flag}  {c.name:<32} residual {c.residual: .3e}  "
                f"tol {c.tolerance:.1e}"
            )
        return "\n".join(lines)


def verify_plan(problem, plan):
    """Recompute every CovariancePlan invariant by direct linear algebra.

    Each check reports its residual; the report never raises.
    """
    inst = problem.instance
    mdl = inst.model
    T = mdl.T
    checks = []

    def add(name, residual, tolerance):
        checks.append(CheckResult(name=name, passed=bool(residual <= tolerance),
                                  residual=float(residual), tolerance=tolerance))

    # positive definiteness of decision matrices
    pd_res = 0.0
    for t in range(T):
        for M in (plan.Pfilt[t], plan.Pi[t]):
            lo = linalg.min_eigenvalue(M)
            pd_res = max(pd_res, -lo / spectral_scale(M))
    add("decision_matrices_pd", pd_res, 1e-10)

    # prior and predictor dominance: P_{t|t} <= P_{t|t-1}
    dom_res = 0.0
    for t in range(T):
        diff = symmetrize(plan.Ppred[t] - plan.Pfilt[t])
        lo = linalg.min_eigenvalue(diff)
        dom_res = max(dom_res, -lo / spectral_scale(plan.Ppred[t]))
    add("filtered_dominated_by_predicted", dom_res, 1e-8)

    # predictor recomputation
    pred_res = 0.0
    pred = predictor_sequence(inst, plan.Pfilt)
    for t in range(T):
        num = float(np.max(np.abs(pred[t] - plan.Ppred[t])))
        pred_res = max(pred_res, num / spectral_scale(pred[t]))
    add("predictor_recursion", pred_res, 1e-10)

    # terminal equality
    term = float(np.max(np.abs(plan.Pi[T - 1] - plan.Pfilt[T - 1])))
    add("terminal_equality", term / spectral_scale(plan.Pfilt[T - 1]), 1e-6)

    # block LMI for t < T
    lmi_res = 0.0
    for t in range(T - 1):
        P, Pi = plan.Pfilt[t], plan.Pi[t]
        At, Wt = mdl.A[t], mdl.SigmaW[t]
        ok, lo = linalg.schur_psd_check(
            P - Pi, P @ At.T, symmetrize(At @ P @ At.T + Wt)
        )
        block_scale = spectral_scale(symmetrize(At @ P @ At.T + Wt))
        lmi_res = max(lmi_res, -lo / block_scale)
    add("schur_block_lmi", lmi_res, 1e-9)

    # budget
    used = sum(
        float(np.trace(th @ P)) for th, P in zip(problem.Theta, plan.Pfilt)
    ) + problem.c2
    add("budget", (used - problem.D) / (1.0 + abs(problem.D)), 1e-8)

    # objective value and identities
    add("objective_nonnegative", -plan.objective_nats, 1e-9)
    recomputed = objective_from_pi(problem, plan.Pi)
    add("objective_from_pi", abs(recomputed - plan.objective_nats), 1e-9)
    di = directed_info_nats(plan.Ppred, plan.Pfilt)
    add("objective_equals_directed_info", abs(di - plan.objective_nats), 1e-6)

    return CertificateReport(checks=tuple(checks))


# ---------------------------------------------------------------------------
# Plain-text dump of the assembled program for cross-solver audits
# ---------------------------------------------------------------------------


def _triplets(M):
    lines = []
    for i in range(M.shape[0]):
        for j in range(M.shape[1]):
            if M[i, j] != 0.0:
                lines.append(f"{i + 1} {j + 1} {M[i, j]:.17g}")
    return lines


def dump_program(problem, path):
    """Write the program data in a documented plain-text form.

    Format: a header line ``maxdet-program 1``, then ``n``, ``T``, ``D``,
    ``c1``, ``c2`` key/value lines, then one ``matrix NAME t ROWS COLS``
    section per coefficient matrix with 1-based coordinate triplets
    ``row col value`` (17 significant digits), zeros omitted.
    """
    inst = problem.instance
    mdl = inst.model
    out = ["maxdet-program 1", f"n {mdl.n}", f"T {mdl.T}",
           f"D {problem.D:.17g}", f"c1 {problem.c1:.17g}",
           f"c2 {problem.c2:.17g}"]

    def section(name, t, M):
        out.append(f"matrix {name} {t} {M.shape[0]} {M.shape[1]}")
        out.extend(_triplets(M))

    section("P10", 0, mdl.P10)
    for t in range(mdl.T):
        section("A", t + 1, mdl.A[t])
        section("SigmaW", t + 1, mdl.SigmaW[t])
        section("Theta", t + 1, problem.Theta[t])
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
