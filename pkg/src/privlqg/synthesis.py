"""Sensor factorization and Kalman gains realizing a covariance plan.

The information increment at step t is

    DXi_t = P_{t|t}^-1 - P_{t|t-1}^-1   (P_{1|0} for t = 1),

eigendecomposed as U diag(lambda) U'.  Eigenpairs above the rank
threshold become sensor rows: C_t stacks the kept unit-norm
eigenvectors, SigmaV_t = diag(1 / lambda_i), so that
C_t' SigmaV_t^-1 C_t reproduces DXi_t.  Rows are ordered by decreasing
eigenvalue and each eigenvector's sign is pinned (largest-magnitude
entry positive) so synthesized designs are reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import maxdet
from .errors import NegativeIncrement, SingularInnovationCovariance
from .linalg import inv_pd, solve_pd, spectral_scale, symmetrize
from .model import validate
from .riccati import backward_riccati

#: eigenvalues of DXi_t below RANK_THRESHOLD * (1 + ||DXi_t||) are treated as
#: zero; the covariance program returns near-singular increments at low
#: budgets and spurious rows would inject enormous sensor noise.
RANK_THRESHOLD = 1e-9

LN2 = float(np.log(2.0))


@dataclass(frozen=True)
class FilterDesign:
    """Complete joint design: sensor, gains, plan, and privacy accounting."""

    C: tuple
    SigmaV: tuple
    L: tuple
    K: tuple
    plan: object
    privacy_bits: float
    privacy_per_step_bits: tuple

    @property
    def ranks(self):
        return tuple(C.shape[0] for C in self.C)


def _canonical_rows(vals, vecs):
    """Order eigenpairs by decreasing eigenvalue; pin eigenvector signs."""
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = vecs[:, order]
    for k in range(vecs.shape[1]):
        col = vecs[:, k]
        pivot = int(np.argmax(np.abs(col)))
        if col[pivot] < 0:
            vecs[:, k] = -col
    return vals, vecs


def synthesize_sensor(plan, instance):
    """Factor each information increment into (C_t, SigmaV_t).

    Raises NegativeIncrement when DXi_t has an eigenvalue below
    -RANK_THRESHOLD * scale, which signals an invalid plan.
    """
    instance = validate(instance)
    T = instance.T
    C, SigmaV = [], []
    for t in range(T):
        Xi = symmetrize(inv_pd(plan.Pfilt[t]) - inv_pd(plan.Ppred[t]))
        thr = RANK_THRESHOLD * spectral_scale(Xi)
        vals, vecs = np.linalg.eigh(Xi)
        if vals.min() < -thr:
            raise NegativeIncrement(
                f"information increment at t={t + 1} has eigenvalue "
                f"{vals.min():.3e} below -{thr:.3e}"
            )
        keep = vals > thr
        vals, vecs = _canonical_rows(vals[keep], vecs[:, keep])
        C.append(vecs.T.copy())
        SigmaV.append(np.diag(1.0 / vals) if vals.size else np.zeros((0, 0)))
    return tuple(C), tuple(SigmaV)


def kalman_gains(C, SigmaV, plan, instance):
    """L_t = P_{t|t-1} C_t' (C_t P_{t|t-1} C_t' + SigmaV_t)^-1."""
    instance = validate(instance)
    n = instance.n
    L = []
    for t in range(instance.T):
        Ct, Vt = C[t], SigmaV[t]
        r = Ct.shape[0]
        if r == 0:
            L.append(np.zeros((n, 0)))
            continue
        pred = plan.Ppred[t]
        innov = symmetrize(Ct @ pred @ Ct.T + Vt)
        try:
            Lt = solve_pd(innov, Ct @ pred).T
        except Exception as exc:
            raise SingularInnovationCovariance(str(exc)) from None
        L.append(Lt)
    return tuple(L)


def per_step_privacy_bits(plan):
    """gamma_t = (logdet P_{t|t-1} - logdet P_{t|t}) / (2 ln 2), in bits."""
    from .linalg import logdet_pd

    return tuple(
        (logdet_pd(pred) - logdet_pd(filt)) / (2.0 * LN2)
        for pred, filt in zip(plan.Ppred, plan.Pfilt)
    )


def design_from_plan(plan, instance, gains=None):
    """Package a FilterDesign realizing an existing covariance plan."""
    instance = validate(instance)
    if gains is None:
        gains = backward_riccati(instance).K
    C, SigmaV = synthesize_sensor(plan, instance)
    L = kalman_gains(C, SigmaV, plan, instance)
    per_step = per_step_privacy_bits(plan)
    return FilterDesign(
        C=C, SigmaV=SigmaV, L=L, K=tuple(gains), plan=plan,
        privacy_bits=float(sum(per_step)),
        privacy_per_step_bits=per_step,
    )


def design(instance, cost=None, tol=None):
    """Full pipeline: Riccati -> covariance program -> sensor -> gains.

    Propagates Infeasible and solver errors from the covariance program.
    """
    instance = validate(instance, cost)
    ricc = backward_riccati(instance)
    problem = maxdet.build_problem(instance, ricc)
    plan = maxdet.solve(problem, tol=tol)
    return design_from_plan(plan, instance, gains=ricc.K)
