"""Finite-alphabet single-stage privacy toolkit under logarithmic loss.

Verifies the axiomatic identities numerically: the Bayes envelope of log
loss is the Shannon entropy, the envelope-difference leakage equals
mutual information, and leakage is invariant under sufficient statistics
(and never increases under any deterministic processing of the private
variable).  All quantities are in bits; 0 log 0 := 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, OutOfRange

#: conditional-independence residuals below this are treated as exact
SUFFICIENCY_TOL = 1e-10


@dataclass(frozen=True)
class DiscreteJoint:
    """Joint pmf P(X, Y) as a |X| x |Y| nonnegative matrix summing to 1."""

    pXY: np.ndarray

    def __post_init__(self):
        p = np.atleast_2d(np.asarray(self.pXY, dtype=float))
        if np.any(p < 0):
            raise OutOfRange("joint pmf has a negative entry")
        if abs(p.sum() - 1.0) > 1e-12:
            raise OutOfRange(f"joint pmf sums to {p.sum()!r}, not 1")
        object.__setattr__(self, "pXY", p)

    @property
    def pX(self):
        return self.pXY.sum(axis=1)

    @property
    def pY(self):
        return self.pXY.sum(axis=0)


@dataclass(frozen=True)
class StatisticMap:
    """Total function table on the X alphabet (indices into the alphabet)."""

    table: tuple

    def __post_init__(self):
        object.__setattr__(self, "table", tuple(int(v) for v in self.table))

    def check_total(self, size):
        if len(self.table) != size:
            raise DimensionMismatch(
                f"statistic table has {len(self.table)} entries for "
                f"alphabet size {size}"
            )
        if any(not 0 <= v < size for v in self.table):
            raise OutOfRange("statistic maps outside the alphabet")


def entropy_bits(p):
    """Shannon entropy of a pmf, 0 log 0 := 0."""
    p = np.asarray(p, dtype=float)
    nz = p > 0
    return float(-np.sum(p[nz] * np.log2(p[nz])))


def expected_log_loss(p, q):
    """E_p[log2 1/q(x)]; infinite when q puts zero mass where p does not."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    nz = p > 0
    if np.any(q[nz] <= 0):
        return float("inf")
    return float(-np.sum(p[nz] * np.log2(q[nz])))


def bayes_envelope_logloss(pX):
    """inf_Q E[log 1/Q(x)] = H(X); returns (entropy bits, achieving Q)."""
    pX = np.asarray(pX, dtype=float)
    if np.any(pX < 0) or abs(pX.sum() - 1.0) > 1e-12:
        raise OutOfRange("not a pmf")
    return entropy_bits(pX), pX.copy()


@dataclass(frozen=True)
class LeakageResult:
    envelope_difference_bits: float
    mutual_information_bits: float

    @property
    def bits(self):
        return self.envelope_difference_bits


def leakage_logloss(joint):
    """Envelope-difference leakage and direct mutual information, asserted equal.

    The inner infima are solved exactly (the posterior pmf achieves each),
    so the first computation is H(X) - sum_y P(y) H(X|Y=y); the second is
    the double sum p(x,y) log p(x,y)/(p(x)p(y)).  Zero-probability columns
    of Y contribute no mass and are skipped.
    """
    p = joint.pXY
    pX, pY = joint.pX, joint.pY

    prior_envelope, _ = bayes_envelope_logloss(pX)
    posterior_envelope = 0.0
    for y in range(p.shape[1]):
        if pY[y] <= 0:
            continue
        posterior_envelope += pY[y] * entropy_bits(p[:, y] / pY[y])
    envelope_diff = prior_envelope - posterior_envelope

    mask = p > 0
    ratio = p[mask] / (np.outer(pX, pY)[mask])
    mi = float(np.sum(p[mask] * np.log2(ratio)))

    if abs(envelope_diff - mi) > 1e-12 * (1.0 + abs(mi)):
        raise AssertionError(
            f"leakage identity violated: envelope {envelope_diff!r} vs "
            f"mutual information {mi!r}"
        )
    return LeakageResult(envelope_difference_bits=envelope_diff,
                         mutual_information_bits=mi)


def pushforward_joint(joint, statistic):
    """Joint pmf of (T(X), Y) on the same X alphabet."""
    p = joint.pXY
    statistic.check_total(p.shape[0])
    out = np.zeros_like(p)
    for x, tx in enumerate(statistic.table):
        out[tx] += p[x]
    return DiscreteJoint(pXY=out)


@dataclass(frozen=True)
class VerdictReport:
    sufficiency_holds: bool
    chain_tx_x_y_residual: float
    chain_x_tx_y_residual: float
    leakage_original_bits: float
    leakage_statistic_bits: float

    @property
    def gap_bits(self):
        return self.leakage_original_bits - self.leakage_statistic_bits

    @property
    def leakage_equal(self):
        return abs(self.gap_bits) <= SUFFICIENCY_TOL


def check_data_processing(joint, statistic):
    """Test the two Markov chains, then compare leakages.

    Checks T(X) - X - Y (automatic for deterministic maps, the residual is
    reported anyway) and X - T(X) - Y via the triple residual
    max |P(x,y,tau) P(tau) - P(x,tau) P(tau,y)|.  When both hold, the
    statistic is sufficient and leakage must be preserved; in general it
    can only decrease.
    """
    p = joint.pXY
    nx = p.shape[0]
    statistic.check_total(nx)
    table = np.asarray(statistic.table)
    pX = joint.pX

    # chain T(X) - X - Y: P(tau, y | x) factorizes because tau = T(x)
    res1 = 0.0
    for x in range(nx):
        if pX[x] <= 0:
            continue
        for tau in range(nx):
            p_tau_given_x = 1.0 if table[x] == tau else 0.0
            joint_given_x = p[x] / pX[x] * p_tau_given_x
            res1 = max(res1, float(np.max(np.abs(
                joint_given_x - p_tau_given_x * p[x] / pX[x]
            ))))

    # chain X - T(X) - Y: triple residual with b = T(X)
    pTau = np.zeros(nx)
    pTauY = np.zeros_like(p)
    for x in range(nx):
        pTau[table[x]] += pX[x]
        pTauY[table[x]] += p[x]
    res2 = 0.0
    for x in range(nx):
        tau = table[x]
        res2 = max(res2, float(np.max(np.abs(
            p[x] * pTau[tau] - pX[x] * pTauY[tau]
        ))))

    sufficient = res1 <= SUFFICIENCY_TOL and res2 <= SUFFICIENCY_TOL
    leak_x = leakage_logloss(joint).bits
    leak_t = leakage_logloss(pushforward_joint(joint, statistic)).bits
    return VerdictReport(
        sufficiency_holds=sufficient,
        chain_tx_x_y_residual=res1,
        chain_x_tx_y_residual=res2,
        leakage_original_bits=leak_x,
        leakage_statistic_bits=leak_t,
    )
