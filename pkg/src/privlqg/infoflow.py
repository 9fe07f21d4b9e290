"""Directed-information analytics: per-step privacy loss, the exact joint
Gaussian oracle, and the distortion-rate / error-probability floors.

The oracle assembles the closed-loop joint covariance of (X^T, Y^T, U^T)
by stacking the linear maps from the primitive noise vector
(X_1 - m1, W_1..W_{T-1}, V_1..V_T) and evaluates every conditional
mutual information as a logdet ratio of conditional covariances.
Conditioning variables may be degenerate (U^t is a deterministic linear
function of Y^t in this architecture), so conditioning uses an
eigenvalue-cutoff pseudoinverse, which is exact for Gaussians; the
condition-number guard applies to the positive definite blocks whose
logdets are taken.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IllConditioned, OutOfRange, UnsupportedDimension
from .linalg import logdet_pd, symmetrize
from .model import validate
from .synthesis import LN2, per_step_privacy_bits

_COND_LIMIT = 1e12
_PINV_CUTOFF = 1e-12


@dataclass(frozen=True)
class PrivacyReport:
    """Privacy accounting for a synthesized design, everything in bits."""

    total_bits: float
    per_step_bits: tuple
    di_x_to_u: float
    di_x_to_y_given_u: float
    distortion_rate_floor: tuple


def directed_info_from_plan(plan):
    """Per-step privacy loss gamma_t in bits from the covariance plan."""
    return per_step_privacy_bits(plan)


def _conditional_cov(Sigma, idx_a, idx_c):
    """Cov(a | c) via Schur complement with a pseudoinverse on Sigma_cc."""
    A = np.ix_(idx_a, idx_a)
    if len(idx_c) == 0:
        return Sigma[A].copy()
    Sac = Sigma[np.ix_(idx_a, idx_c)]
    Scc = symmetrize(Sigma[np.ix_(idx_c, idx_c)])
    vals, vecs = np.linalg.eigh(Scc)
    cutoff = _PINV_CUTOFF * max(float(vals.max()), 0.0)
    keep = vals > cutoff
    inv_vals = np.zeros_like(vals)
    np.divide(1.0, vals, out=inv_vals, where=keep)
    Scc_pinv = (vecs * inv_vals) @ vecs.T
    return symmetrize(Sigma[A] - Sac @ Scc_pinv @ Sac.T)


def _guarded_logdet(M, what):
    vals = np.linalg.eigvalsh(symmetrize(M))
    if vals.min() <= 0:
        raise IllConditioned(
            f"{what} is numerically singular (min eigenvalue {vals.min():.3e})"
        )
    if vals.max() / vals.min() > _COND_LIMIT:
        raise IllConditioned(
            f"{what} has condition number {vals.max() / vals.min():.3e} > 1e12"
        )
    return float(np.sum(np.log(vals)))


class _ClosedLoop:
    """Linear maps from the primitive noise vector to X_t, Y_t, U_t."""

    def __init__(self, design, instance):
        instance = validate(instance)
        mdl = instance.model
        T, n, m = mdl.T, mdl.n, mdl.m
        ranks = [C.shape[0] for C in design.C]

        # primitive noise layout: x1 | w_1..w_{T-1} | v_1..v_T
        dim = n + (T - 1) * n + sum(ranks)
        off_w = [n + t * n for t in range(T - 1)]
        off_v, pos = [], n + (T - 1) * n
        for r in ranks:
            off_v.append(pos)
            pos += r

        cov_blocks = [mdl.P10] + [mdl.SigmaW[t] for t in range(T - 1)] + [
            design.SigmaV[t] for t in range(T)
        ]
        self.noise_cov = np.zeros((dim, dim))
        start = 0
        for blockM in cov_blocks:
            k = blockM.shape[0]
            self.noise_cov[start:start + k, start:start + k] = blockM
            start += k

        MX = [np.zeros((n, dim)) for _ in range(T)]
        MXh = [np.zeros((n, dim)) for _ in range(T)]
        MY = [np.zeros((r, dim)) for r in ranks]
        MU = [np.zeros((m, dim)) for _ in range(T)]

        MX[0][:, 0:n] = np.eye(n)
        for t in range(T):
            r = ranks[t]
            if r:
                MY[t] = design.C[t] @ MX[t]
                MY[t][:, off_v[t]:off_v[t] + r] += np.eye(r)
            if t == 0:
                pred = np.zeros((n, dim))
            else:
                pred = mdl.A[t - 1] @ MXh[t - 1] + mdl.B[t - 1] @ MU[t - 1]
            if r:
                MXh[t] = (np.eye(n) - design.L[t] @ design.C[t]) @ pred \
                    + design.L[t] @ MY[t]
            else:
                MXh[t] = pred
            MU[t] = design.K[t] @ MXh[t]
            if t + 1 < T:
                MX[t + 1] = mdl.A[t] @ MX[t] + mdl.B[t] @ MU[t]
                MX[t + 1][:, off_w[t]:off_w[t] + n] += np.eye(n)

        rows = np.vstack(MX + MY + MU)
        self.cov = symmetrize(rows @ self.noise_cov @ rows.T)

        self.x_idx, self.y_idx, self.u_idx = [], [], []
        pos = 0
        for t in range(T):
            self.x_idx.append(list(range(pos, pos + n)))
            pos += n
        for t in range(T):
            self.y_idx.append(list(range(pos, pos + ranks[t])))
            pos += ranks[t]
        for t in range(T):
            self.u_idx.append(list(range(pos, pos + m)))
            pos += m
        self.T = T

    def upto(self, idx_lists, t):
        """Indices of the stacked prefix (1-based step count t)."""
        out = []
        for s in range(t):
            out.extend(idx_lists[s])
        return out

    def cond_logdet(self, idx_a, idx_c, what):
        return _guarded_logdet(_conditional_cov(self.cov, idx_a, idx_c), what)


def directed_info_joint_oracle(design, instance, per_step=False):
    """I(X^T -> U^T) and I(X^T -> Y^T || U^{T-1}) from the exact joint law.

    Both are returned in bits.  With per_step=True, also returns the two
    per-step sequences and the single-shot residual I(X^T; Y^T | U^T),
    which equals their difference by the chain rule.
    """
    loop = _ClosedLoop(design, instance)
    T = loop.T

    to_u, to_y = [], []
    for t in range(1, T + 1):
        xt = loop.upto(loop.x_idx, t)
        u_prev = loop.upto(loop.u_idx, t - 1)
        u_now = loop.upto(loop.u_idx, t)
        y_prev = loop.upto(loop.y_idx, t - 1)
        y_now = loop.upto(loop.y_idx, t)

        h_prev = loop.cond_logdet(xt, u_prev, f"Cov(X^{t}|U^{t - 1})")
        h_now = loop.cond_logdet(xt, u_now, f"Cov(X^{t}|U^{t})")
        to_u.append(0.5 * (h_prev - h_now) / LN2)

        h_prev = loop.cond_logdet(xt, y_prev + u_prev,
                                  f"Cov(X^{t}|Y^{t - 1},U^{t - 1})")
        h_now = loop.cond_logdet(xt, y_now + u_prev,
                                 f"Cov(X^{t}|Y^{t},U^{t - 1})")
        to_y.append(0.5 * (h_prev - h_now) / LN2)

    di_u = float(sum(to_u))
    di_y = float(sum(to_y))
    if not per_step:
        return di_u, di_y

    xT = loop.upto(loop.x_idx, T)
    uT = loop.upto(loop.u_idx, T)
    yT = loop.upto(loop.y_idx, T)
    residual = 0.5 * (
        loop.cond_logdet(xT, uT, "Cov(X^T|U^T)")
        - loop.cond_logdet(xT, yT + uT, "Cov(X^T|Y^T,U^T)")
    ) / LN2
    return di_u, di_y, tuple(to_u), tuple(to_y), float(residual)


def distortion_rate_floor(plan, t):
    """Scalar Gaussian distortion-rate floor P_{t|t-1} 2^(-2 gamma_t) at step t.

    1-based t; UnsupportedDimension for n > 1 (matrix distortion-rate
    functions are out of scope).  For synthesized Gaussian designs the
    floor equals P_{t|t} exactly.
    """
    n = plan.Pfilt[0].shape[0]
    if n != 1:
        raise UnsupportedDimension(
            f"distortion-rate floor is defined for scalar instances, n = {n}"
        )
    if not 1 <= t <= len(plan.Pfilt):
        raise OutOfRange(f"t = {t} outside 1..{len(plan.Pfilt)}")
    gamma = per_step_privacy_bits(plan)[t - 1]
    pred = float(plan.Ppred[t - 1][0, 0])
    return pred * 2.0 ** (-2.0 * gamma)


def binary_entropy_bits(eps):
    if eps <= 0.0 or eps >= 1.0:
        return 0.0
    return float(-eps * np.log2(eps) - (1 - eps) * np.log2(1 - eps))


def fano_floor(residual_entropy_bits, alphabet_size):
    """Smallest error probability compatible with the residual entropy.

    Solves  eps * log2(M - 1) + h(eps) >= residual  for the smallest
    eps in [0, 1 - 1/M] by bisection to 1e-10.  residual must lie in
    [0, log2(M)].
    """
    M = int(alphabet_size)
    if M < 2:
        raise OutOfRange(f"alphabet size must be >= 2, got {alphabet_size}")
    residual = float(residual_entropy_bits)
    hi_cap = float(np.log2(M))
    if residual < -1e-15 or residual > hi_cap + 1e-12:
        raise OutOfRange(
            f"residual entropy {residual} outside [0, log2({M})] = [0, {hi_cap}]"
        )
    residual = min(max(residual, 0.0), hi_cap)
    if residual == 0.0:
        return 0.0

    log_m1 = float(np.log2(M - 1)) if M > 1 else 0.0

    def g(eps):
        return eps * log_m1 + binary_entropy_bits(eps)

    lo, hi = 0.0, 1.0 - 1.0 / M
    if residual >= g(hi):
        return hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) >= residual:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-10:
            break
    return hi


def build_privacy_report(design, instance, with_oracle=None):
    """Assemble a PrivacyReport for a synthesized design.

    The joint oracle is evaluated when the stacked dimension is modest
    (n*T <= 200 by default); pass with_oracle=True/False to force.
    """
    instance = validate(instance)
    per_step = design.privacy_per_step_bits
    n, T = instance.n, instance.T
    if with_oracle is None:
        with_oracle = n * T <= 200
    di_u = di_y = float("nan")
    if with_oracle:
        di_u, di_y = directed_info_joint_oracle(design, instance)
    floors = ()
    if n == 1:
        floors = tuple(
            distortion_rate_floor(design.plan, t) for t in range(1, T + 1)
        )
    return PrivacyReport(
        total_bits=design.privacy_bits,
        per_step_bits=per_step,
        di_x_to_u=di_u,
        di_x_to_y_given_u=di_y,
        distortion_rate_floor=floors,
    )
