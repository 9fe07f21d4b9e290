import numpy as np
import pytest

from privlqg import (
    DimensionMismatch,
    NonFiniteEntry,
    NotPositiveDefinite,
    make_cost,
    make_system,
    scalar_instance,
    validate,
)


def navigation_model(sigma_w=None, a_len=40):
    W = 0.3 if sigma_w is None else sigma_w
    return make_system(40, [np.eye(1)] * a_len, 1.0, W, [15.0], [[1.0]])


def test_navigation_scenario_is_valid():
    inst = scalar_instance(T=40, a=1.0, b=1.0, sigma_w=0.3, m1=15.0,
                           p10=1.0, q=1.0, r=10.0, delta=24.4)
    assert inst.T == 40 and inst.n == 1 and inst.m == 1
    assert inst.model.SigmaW[0][0, 0] == 0.3


def test_zero_sigma_w_rejected():
    W = [np.array([[0.3]])] * 40
    W[2] = np.array([[0.0]])  # SigmaW[3] in 1-based indexing
    model = make_system(40, 1.0, 1.0, W, [15.0], [[1.0]])
    cost = make_cost(40, 1.0, 10.0, 24.4)
    with pytest.raises(NotPositiveDefinite) as err:
        validate(model, cost)
    assert "SigmaW[3]" in str(err.value)


def test_sequence_length_mismatch():
    # construction-time check
    with pytest.raises(DimensionMismatch):
        navigation_model(a_len=39)
    # validate-time check for models assembled by hand
    from privlqg import SystemModel

    good = navigation_model()
    short = SystemModel(T=40, A=good.A[:39], B=good.B, SigmaW=good.SigmaW,
                        m1=good.m1, P10=good.P10)
    with pytest.raises(DimensionMismatch):
        validate(short, make_cost(40, 1.0, 10.0, 24.4))


def test_validate_idempotent():
    inst = scalar_instance(T=5)
    assert validate(inst) is inst
    again = validate(inst.model, inst.cost)
    for M1, M2 in zip(again.model.SigmaW, inst.model.SigmaW):
        assert np.array_equal(M1, M2)


@pytest.mark.parametrize("corruption", [
    "q_indefinite", "r_semidefinite", "p10_zero", "a_shape", "b_shape",
    "delta_zero", "delta_nan", "nan_entry", "asymmetric_w",
])
def test_single_field_corruptions_rejected(corruption):
    T, n = 4, 2
    A = [np.eye(n) * 0.5] * T
    B = [np.ones((n, 1))] * T
    W = [np.eye(n)] * T
    Q = [np.eye(n)] * T
    R = [np.eye(1)] * T
    delta = 5.0
    if corruption == "q_indefinite":
        Q = [np.diag([1.0, -0.5])] * T
    elif corruption == "r_semidefinite":
        R = [np.zeros((1, 1))] * T
    elif corruption == "p10_zero":
        P10 = np.zeros((n, n))
    elif corruption == "a_shape":
        A = [np.eye(n)] * (T - 1) + [np.eye(n + 1)]
    elif corruption == "b_shape":
        B = [np.ones((n, 1))] * (T - 1) + [np.ones((n + 1, 1))]
    elif corruption == "delta_zero":
        delta = 0.0
    elif corruption == "delta_nan":
        delta = float("nan")
    elif corruption == "nan_entry":
        A = [np.eye(n)] * (T - 1) + [np.full((n, n), np.nan)]
    elif corruption == "asymmetric_w":
        bad = np.eye(n).copy()
        bad[0, 1] = 0.5  # asymmetric beyond tolerance
        W = [bad] * T
    P10 = np.zeros((n, n)) if corruption == "p10_zero" else np.eye(n)
    model = make_system(T, A, B, W, np.zeros(n), P10)
    cost = make_cost(T, Q, R, delta)
    with pytest.raises((DimensionMismatch, NotPositiveDefinite,
                        NonFiniteEntry)):
        validate(model, cost)


def test_rounded_asymmetry_tolerated_and_symmetrized():
    n = 2
    W = np.array([[1.0, 0.2 + 5e-12], [0.2, 1.0]])
    model = make_system(3, np.eye(n) * 0.5, np.ones((n, 1)), W,
                        np.zeros(n), np.eye(n))
    cost = make_cost(3, np.eye(n), np.eye(1), 1.0)
    inst = validate(model, cost)
    got = inst.model.SigmaW[0]
    assert np.array_equal(got, got.T)


def test_mean_cost_flags_roundtrip():
    inst = scalar_instance(T=3, delta=9.0, include_mean_cost=True,
                           delta_net_of_constants=True)
    assert inst.cost.include_mean_cost
    assert inst.cost.delta_net_of_constants
