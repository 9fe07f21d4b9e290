"""Plant, cost, and horizon data types plus instance validation.

Time indexing is 1-based at every external surface (configs, reports,
error messages); internally sequences are plain 0-based tuples of arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import linalg
from .errors import DimensionMismatch, NonFiniteEntry, NotPositiveDefinite

#: matrices are accepted as symmetric when max|M - M'| <= SYM_TOL * (1 + max|M|)
SYM_TOL = 1e-10


@dataclass(frozen=True)
class SystemModel:
    """Time-varying linear-Gaussian plant with an initial-state prior.

    Fields are length-T tuples of ndarrays (A: n x n, B: n x m,
    SigmaW: n x n), the initial mean m1 (length n) and the prior
    covariance P10 (n x n).  Treat arrays as immutable after validation.
    """

    T: int
    A: tuple
    B: tuple
    SigmaW: tuple
    m1: np.ndarray
    P10: np.ndarray

    @property
    def n(self):
        return self.m1.shape[0]

    @property
    def m(self):
        return self.B[0].shape[1]


@dataclass(frozen=True)
class CostSpec:
    """Quadratic stage weights and the control performance budget.

    delta is the budget on the total cost sum E(|X_{t+1}|_Q^2 + |U_t|_R^2).
    include_mean_cost charges the deterministic mean-regulation cost
    m1' Phi_1 m1 against the budget; delta_net_of_constants reads delta as
    budgeting only the sum of trace(Theta_t P_{t|t}) terms, i.e. net of the
    irreducible noise-floor constant.
    """

    Q: tuple
    R: tuple
    delta: float
    include_mean_cost: bool = False
    delta_net_of_constants: bool = False


@dataclass(frozen=True)
class ValidatedInstance:
    """A (SystemModel, CostSpec) pair that passed every invariant check."""

    model: SystemModel
    cost: CostSpec

    @property
    def T(self):
        return self.model.T

    @property
    def n(self):
        return self.model.n

    @property
    def m(self):
        return self.model.m


def _as_sequence(entry, T, name):
    """Normalize a single array or a length-T list of arrays to a tuple."""
    if isinstance(entry, (list, tuple)):
        if len(entry) != T:
            raise DimensionMismatch(
                f"{name}: expected {T} entries, got {len(entry)}"
            )
        return tuple(np.atleast_2d(np.asarray(x, dtype=float)) for x in entry)
    arr = np.atleast_2d(np.asarray(entry, dtype=float))
    return tuple(arr.copy() for _ in range(T))


def _check_finite(M, name):
    if not np.all(np.isfinite(M)):
        raise NonFiniteEntry(f"{name} contains a non-finite entry")


def _check_shape(M, shape, name):
    if M.shape != shape:
        raise DimensionMismatch(f"{name}: expected shape {shape}, got {M.shape}")


def _symmetric(M, name):
    _check_finite(M, name)
    if linalg.symmetry_residual(M) > SYM_TOL:
        raise DimensionMismatch(f"{name} is not symmetric")
    return linalg.symmetrize(M)


def _symmetric_pd(M, name):
    M = _symmetric(M, name)
    lo = linalg.min_eigenvalue(M)
    if not lo > 1e-12 * linalg.spectral_scale(M):
        raise NotPositiveDefinite(name, lo)
    return M


def _symmetric_psd(M, name):
    M = _symmetric(M, name)
    lo = linalg.min_eigenvalue(M)
    if lo < -1e-12 * linalg.spectral_scale(M):
        raise NotPositiveDefinite(name, lo)
    return M


def make_system(T, A, B, SigmaW, m1, P10):
    """Build a SystemModel from arrays, broadcasting single matrices over t."""
    T = int(T)
    if T < 1:
        raise DimensionMismatch(f"horizon must be >= 1, got {T}")
    m1 = np.atleast_1d(np.asarray(m1, dtype=float))
    P10 = np.atleast_2d(np.asarray(P10, dtype=float))
    return SystemModel(
        T=T,
        A=_as_sequence(A, T, "A"),
        B=_as_sequence(B, T, "B"),
        SigmaW=_as_sequence(SigmaW, T, "SigmaW"),
        m1=m1,
        P10=P10,
    )


def make_cost(T, Q, R, delta, include_mean_cost=False, delta_net_of_constants=False):
    return CostSpec(
        Q=_as_sequence(Q, int(T), "Q"),
        R=_as_sequence(R, int(T), "R"),
        delta=float(delta),
        include_mean_cost=bool(include_mean_cost),
        delta_net_of_constants=bool(delta_net_of_constants),
    )


def validate(model, cost=None):
    """Check every model/cost invariant and return a ValidatedInstance.

    Idempotent: passing an already validated instance returns it unchanged.

    Raises
    ------
    DimensionMismatch, NotPositiveDefinite, NonFiniteEntry
    """
    if isinstance(model, ValidatedInstance):
        if cost is not None:
            raise DimensionMismatch(
                "pass either a ValidatedInstance or a (model, cost) pair"
            )
        return model
    if cost is None:
        raise DimensionMismatch("a CostSpec is required")

    T = model.T
    for name, seq in (("A", model.A), ("B", model.B), ("SigmaW", model.SigmaW),
                      ("Q", cost.Q), ("R", cost.R)):
        if len(seq) != T:
            raise DimensionMismatch(
                f"{name}: expected {T} entries, got {len(seq)}"
            )

    m1 = np.atleast_1d(np.asarray(model.m1, dtype=float))
    if m1.ndim != 1:
        raise DimensionMismatch(f"m1 must be a vector, got shape {m1.shape}")
    n = m1.shape[0]
    _check_finite(m1, "m1")

    B1 = np.atleast_2d(np.asarray(model.B[0], dtype=float))
    if B1.shape[0] != n:
        raise DimensionMismatch(
            f"B[1]: expected {n} rows to match m1, got {B1.shape[0]}"
        )
    m = B1.shape[1]

    A, B, SigmaW, Q, R = [], [], [], [], []
    for t in range(T):
        At = np.atleast_2d(np.asarray(model.A[t], dtype=float))
        Bt = np.atleast_2d(np.asarray(model.B[t], dtype=float))
        _check_shape(At, (n, n), f"A[{t + 1}]")
        _check_shape(Bt, (n, m), f"B[{t + 1}]")
        _check_finite(At, f"A[{t + 1}]")
        _check_finite(Bt, f"B[{t + 1}]")
        Wt = np.atleast_2d(np.asarray(model.SigmaW[t], dtype=float))
        _check_shape(Wt, (n, n), f"SigmaW[{t + 1}]")
        Qt = np.atleast_2d(np.asarray(cost.Q[t], dtype=float))
        Rt = np.atleast_2d(np.asarray(cost.R[t], dtype=float))
        _check_shape(Qt, (n, n), f"Q[{t + 1}]")
        _check_shape(Rt, (m, m), f"R[{t + 1}]")
        A.append(At)
        B.append(Bt)
        SigmaW.append(_symmetric_pd(Wt, f"SigmaW[{t + 1}]"))
        Q.append(_symmetric_psd(Qt, f"Q[{t + 1}]"))
        R.append(_symmetric_pd(Rt, f"R[{t + 1}]"))

    P10 = np.atleast_2d(np.asarray(model.P10, dtype=float))
    _check_shape(P10, (n, n), "P10")
    P10 = _symmetric_pd(P10, "P10")

    if not np.isfinite(cost.delta) or cost.delta <= 0:
        raise NonFiniteEntry(f"delta must be finite and > 0, got {cost.delta}")

    checked_model = replace(
        model, A=tuple(A), B=tuple(B), SigmaW=tuple(SigmaW), m1=m1, P10=P10
    )
    checked_cost = replace(cost, Q=tuple(Q), R=tuple(R))
    return ValidatedInstance(model=checked_model, cost=checked_cost)


def scalar_instance(T, a=1.0, b=1.0, sigma_w=0.3, m1=15.0, p10=1.0,
                    q=1.0, r=10.0, delta=30.0, **cost_flags):
    """Convenience constructor for scalar (n = m = 1) instances."""
    model = make_system(T, a, b, sigma_w, [m1], [[p10]])
    cost = make_cost(T, q, r, delta, **cost_flags)
    return validate(model, cost)
