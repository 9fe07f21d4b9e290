"""Backward Riccati recursion: value matrices, feedback gains, and weights.

The recursion runs t = T..1:

    S_T = Q_T,             S_t = Q_t + Phi_{t+1}
    Phi_t = A_t'(S_t - S_t B_t (B_t'S_t B_t + R_t)^-1 B_t'S_t) A_t
    K_t   = -(B_t'S_t B_t + R_t)^-1 B_t'S_t A_t
    Theta_t = K_t'(B_t'S_t B_t + R_t) K_t

Gains are obtained by a symmetric-positive-definite solve rather than an
explicit inverse, and S_t, Phi_t are symmetrized each step to prevent
drift over long horizons.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import NotPositiveDefinite, SingularInnovation
from .model import validate


@dataclass(frozen=True)
class RiccatiSolution:
    """Length-T tuples S, Phi, K, Theta indexed 0-based for t = 1..T."""

    S: tuple
    Phi: tuple
    K: tuple
    Theta: tuple


def backward_riccati(instance):
    """Run the backward recursion for a validated instance.

    Deterministic; raises SingularInnovation if B'SB + R loses positive
    definiteness (impossible for validated R > 0 short of numerical abuse).
    """
    instance = validate(instance)
    mdl, cost = instance.model, instance.cost
    T = mdl.T

    S = [None] * T
    Phi = [None] * T
    K = [None] * T
    Theta = [None] * T

    Phi_next = None
    for t in reversed(range(T)):
        St = cost.Q[t] if t == T - 1 else cost.Q[t] + Phi_next
        St = linalg.symmetrize(St)
        At, Bt, Rt = mdl.A[t], mdl.B[t], cost.R[t]
        M = linalg.symmetrize(Bt.T @ St @ Bt + Rt)
        try:
            Kt = -linalg.solve_pd(M, Bt.T @ St @ At, name=f"B'SB+R at t={t + 1}")
        except NotPositiveDefinite as exc:
            raise SingularInnovation(str(exc)) from None
        Phit = linalg.symmetrize(At.T @ St @ At + At.T @ St @ Bt @ Kt)
        S[t] = St
        Phi[t] = Phit
        K[t] = Kt
        Theta[t] = linalg.symmetrize(Kt.T @ M @ Kt)
        Phi_next = Phit

    return RiccatiSolution(S=tuple(S), Phi=tuple(Phi), K=tuple(K),
                           Theta=tuple(Theta))


def closed_loop_cost(instance, gains):
    """Exact expected quadratic cost of full-information feedback U_t = K_t X_t.

    Propagates the state mean and covariance through the closed loop and
    accumulates E(|X_{t+1}|_Q^2 + |U_t|_R^2).  Used as the independent
    oracle for gain optimality checks.
    """
    instance = validate(instance)
    mdl, cost = instance.model, instance.cost
    mu = mdl.m1.copy()
    Sigma = mdl.P10.copy()
    total = 0.0
    for t in range(mdl.T):
        At, Bt, Kt = mdl.A[t], mdl.B[t], gains[t]
        Qt, Rt, Wt = cost.Q[t], cost.R[t], mdl.SigmaW[t]
        KRK = Kt.T @ Rt @ Kt
        total += float(mu @ KRK @ mu + np.trace(KRK @ Sigma))
        Acl = At + Bt @ Kt
        mu = Acl @ mu
        Sigma = linalg.symmetrize(Acl @ Sigma @ Acl.T + Wt)
        total += float(mu @ Qt @ mu + np.trace(Qt @ Sigma))
    return total
