import numpy as np
import pytest

from privlqg import make_cost, make_system, validate, zero_information_plan
from privlqg.maxdet import build_problem


def random_instance(rng, n=None, m=None, T=None, budget_fraction=0.4,
                    spectral=0.8):
    """Random validated instance with a binding (net-of-constants) budget.

    budget_fraction sets the trace budget as a fraction of the
    zero-information cost, so the covariance program is non-trivial
    whenever the fraction is < 1.
    """
    n = n or int(rng.integers(1, 4))
    m = m or int(rng.integers(1, 4))
    T = T or int(rng.integers(2, 11))
    A = [rng.normal(size=(n, n)) * spectral for _ in range(T)]
    B = [rng.normal(size=(n, m)) for _ in range(T)]
    W = [np.eye(n) * 0.5 + 0.05 * np.ones((n, n)) for _ in range(T)]
    Q = [np.eye(n) for _ in range(T)]
    R = [np.eye(m) * 2.0 for _ in range(T)]
    P10 = np.eye(n)
    inst = validate(
        make_system(T, A, B, W, np.zeros(n), P10),
        make_cost(T, Q, R, 1.0, delta_net_of_constants=True),
    )
    prob = build_problem(inst)
    zero_cost = sum(
        float(np.trace(th @ P))
        for th, P in zip(prob.Theta, zero_information_plan(inst))
    )
    return validate(
        inst.model,
        make_cost(T, Q, R, budget_fraction * zero_cost,
                  delta_net_of_constants=True),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
