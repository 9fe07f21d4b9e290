import dataclasses

import numpy as np
import pytest

from privlqg import (
    Infeasible,
    backward_riccati,
    build_problem,
    make_cost,
    make_system,
    scalar_instance,
    solve,
    validate,
    verify_plan,
    zero_information_plan,
)
from privlqg.linalg import inv_pd, logdet_pd, spectral_scale
from privlqg.maxdet import (
    SolverTolerances,
    _Barrier,
    directed_info_nats,
    dump_program,
)
from conftest import random_instance


def zero_info_cost(problem):
    return sum(
        float(np.trace(th @ P))
        for th, P in zip(problem.Theta,
                         zero_information_plan(problem.instance))
    )


# -- build_problem constants -------------------------------------------------


def test_constants_navigation_scenario():
    p10 = 0.7
    inst = scalar_instance(T=40, sigma_w=0.3, p10=p10, delta=24.4)
    prob = build_problem(inst)
    assert prob.c1 == pytest.approx(0.5 * np.log(p10) + 39 * 0.5 * np.log(0.3),
                                    abs=1e-12)
    ricc = backward_riccati(inst)
    c2 = ricc.Phi[0][0, 0] * p10 + 0.3 * sum(S[0, 0] for S in ricc.S)
    assert prob.c2 == pytest.approx(c2, rel=1e-12)
    assert prob.D == 24.4


def test_constants_zero_weight():
    inst = scalar_instance(T=6, q=0.0, delta=1.0)
    prob = build_problem(inst)
    assert prob.c2 == 0.0
    assert all(float(np.abs(th).max()) == 0.0 for th in prob.Theta)


def test_constants_identity_system():
    n, T = 2, 2
    inst = validate(
        make_system(T, np.eye(n), np.eye(n), np.eye(n), np.zeros(n),
                    np.eye(n)),
        make_cost(T, np.eye(n), np.eye(n), 5.0),
    )
    prob = build_problem(inst)
    assert prob.c1 == pytest.approx(0.0, abs=1e-15)


def test_budget_adjustments():
    inst = scalar_instance(T=5, delta=10.0)
    base = build_problem(inst)
    net = build_problem(validate(
        inst.model, dataclasses.replace(inst.cost, delta_net_of_constants=True)
    ))
    assert net.D == pytest.approx(10.0 + base.c2, rel=1e-14)
    mean = build_problem(validate(
        inst.model, dataclasses.replace(inst.cost, include_mean_cost=True)
    ))
    ricc = backward_riccati(inst)
    m_term = float(inst.model.m1 @ ricc.Phi[0] @ inst.model.m1)
    assert mean.D == pytest.approx(10.0 - m_term, rel=1e-14)


# -- solve: infeasibility, zero information, closed forms --------------------


def test_infeasible_below_constant():
    inst = scalar_instance(T=10, delta=1.0)  # c2 >> 1 for this scenario
    prob = build_problem(inst)
    assert prob.D < prob.c2
    with pytest.raises(Infeasible) as err:
        solve(prob)
    assert "c2" in str(err.value)


def test_zero_information_budget_returns_recursion():
    inst = scalar_instance(T=8, p10=2.0, delta=1e9)
    prob = build_problem(inst)
    plan = solve(prob)
    expect = zero_information_plan(inst)
    assert plan.objective_nats == pytest.approx(0.0, abs=1e-9)
    for got, ref in zip(plan.Pfilt, expect):
        assert np.array_equal(got, ref)
    assert verify_plan(prob, plan).passed


def test_single_step_closed_form():
    # T=1: maximize 1/2 log P subject to Theta*P <= bud, P <= P10
    p10 = 3.0
    inst = scalar_instance(T=1, p10=p10, q=1.0, r=10.0, delta=0.08,
                           delta_net_of_constants=True)
    prob = build_problem(inst)
    theta = prob.Theta[0][0, 0]
    p_star = min(p10, prob.budget / theta)
    plan = solve(prob)
    assert plan.Pfilt[0][0, 0] == pytest.approx(p_star, rel=1e-6)
    assert plan.objective_nats == pytest.approx(0.5 * np.log(p10 / p_star),
                                                abs=1e-7)


def grid_oracle_T2(prob, resolution=1e-3):
    """Exhaustive grid over (P_1, P_2) with Pi eliminated by tightness."""
    p10 = prob.instance.model.P10[0, 0]
    w = prob.instance.model.SigmaW[0][0, 0]
    a = prob.instance.model.A[0][0, 0]
    th = [M[0, 0] for M in prob.Theta]
    bud = prob.budget
    hi1 = min(p10, bud / th[0]) if th[0] > 0 else p10
    best = np.inf
    p1_grid = np.arange(resolution * hi1, hi1, resolution * hi1)
    for p1 in p1_grid:
        rem = bud - th[0] * p1
        if rem <= 0:
            continue
        pred2 = a * a * p1 + w
        hi2 = min(pred2, rem / th[1]) if th[1] > 0 else pred2
        p2 = np.arange(resolution * hi2, hi2 + resolution * hi2 * 0.5,
                       resolution * hi2)
        vals = 0.5 * (np.log(p10) - np.log(p1) + np.log(pred2) - np.log(p2))
        best = min(best, float(vals.min()))
    return best


def test_two_step_grid_oracle():
    inst = scalar_instance(T=2, a=1.0, b=1.0, sigma_w=1.0, m1=0.0, p10=1.0,
                           q=1.0, r=1.0, delta=1.0,
                           delta_net_of_constants=True)
    prob = build_problem(inst)
    plan = solve(prob)
    oracle = grid_oracle_T2(prob)
    assert abs(plan.objective_nats - oracle) <= 1e-3


# -- certificates -------------------------------------------------------------


def test_verify_plan_passes_for_solver_output(rng):
    inst = random_instance(rng, budget_fraction=0.3)
    prob = build_problem(inst)
    plan = solve(prob)
    report = verify_plan(prob, plan)
    assert report.passed, str(report)


def test_verify_plan_flags_terminal_corruption(rng):
    inst = random_instance(rng, n=1, budget_fraction=0.3)
    prob = build_problem(inst)
    plan = solve(prob)
    Pi = list(plan.Pi)
    Pi[-1] = Pi[-1] * 1.5
    bad = dataclasses.replace(plan, Pi=tuple(Pi))
    report = verify_plan(prob, bad)
    assert "terminal_equality" in report.failing()


def test_verify_plan_flags_budget_excess(rng):
    inst = random_instance(rng, budget_fraction=0.4)
    prob = build_problem(inst)
    plan = solve(prob)
    used = sum(float(np.trace(th @ P))
               for th, P in zip(prob.Theta, plan.Pfilt)) + prob.c2
    tight = dataclasses.replace(prob, D=used - 1e-3)
    report = verify_plan(tight, plan)
    assert "budget" in report.failing()


# -- optimality structure ------------------------------------------------------


def test_tightness_at_optimum(rng):
    for _ in range(4):
        inst = random_instance(rng, T=int(rng.integers(2, 21)),
                               budget_fraction=float(rng.uniform(0.2, 0.8)))
        prob = build_problem(inst)
        plan = solve(prob)
        mdl = inst.model
        for t in range(inst.T - 1):
            Ct = mdl.A[t].T @ inv_pd(mdl.SigmaW[t]) @ mdl.A[t]
            tight = inv_pd(inv_pd(plan.Pfilt[t]) + Ct)
            err = np.max(np.abs(tight - plan.Pi[t]))
            assert err <= 1e-6 * spectral_scale(tight)
        assert np.array_equal(plan.Pi[inst.T - 1], plan.Pfilt[inst.T - 1])


def test_objective_equals_directed_information(rng):
    for _ in range(4):
        inst = random_instance(rng, budget_fraction=0.5)
        prob = build_problem(inst)
        plan = solve(prob)
        di = directed_info_nats(plan.Ppred, plan.Pfilt)
        assert abs(di - plan.objective_nats) <= 1e-6


def test_budget_monotone_and_convex():
    inst0 = scalar_instance(T=10, p10=1.0, delta=1.0,
                            delta_net_of_constants=True)
    prob0 = build_problem(inst0)
    cap = zero_info_cost(prob0)
    grid = np.linspace(0.1 * cap, 1.1 * cap, 9)
    values = []
    for bud in grid:
        inst = validate(inst0.model,
                        dataclasses.replace(inst0.cost, delta=float(bud)))
        values.append(solve(build_problem(inst)).objective_nats)
    for a, b in zip(values, values[1:]):
        assert b <= a + 1e-6
    second = np.diff(values, 2)
    assert np.min(second) >= -1e-6


def test_coordinate_change_invariance(rng):
    n, m, T = 2, 1, 5
    A = [rng.normal(size=(n, n)) * 0.7 for _ in range(T)]
    B = [rng.normal(size=(n, m)) for _ in range(T)]
    W = [np.eye(n) * 0.5 for _ in range(T)]
    Q = [np.eye(n) for _ in range(T)]
    R = [np.eye(m) for _ in range(T)]
    inst = validate(make_system(T, A, B, W, np.zeros(n), np.eye(n)),
                    make_cost(T, Q, R, 0.4, delta_net_of_constants=True))
    base = solve(build_problem(inst)).objective_nats

    M = rng.normal(size=(n, n)) + 2 * np.eye(n)
    Minv = np.linalg.inv(M)
    inst2 = validate(
        make_system(
            T,
            [M @ At @ Minv for At in A],
            [M @ Bt for Bt in B],
            [M @ Wt @ M.T for Wt in W],
            np.zeros(n),
            M @ np.eye(n) @ M.T,
        ),
        make_cost(T, [Minv.T @ Qt @ Minv for Qt in Q], R, 0.4,
                  delta_net_of_constants=True),
    )
    changed = solve(build_problem(inst2)).objective_nats
    assert changed == pytest.approx(base, abs=1e-6)


def test_solve_deterministic(rng):
    inst = random_instance(rng, budget_fraction=0.35)
    prob = build_problem(inst)
    p1 = solve(prob)
    p2 = solve(prob)
    for M1, M2 in zip(p1.Pfilt, p2.Pfilt):
        assert np.array_equal(M1, M2)
    assert p1.objective_nats == p2.objective_nats


# -- solver internals: derivative oracle --------------------------------------


def test_barrier_derivatives_match_finite_differences(rng):
    inst = random_instance(rng, n=2, m=1, T=4, budget_fraction=0.6)
    prob = build_problem(inst)
    barrier = _Barrier(prob)
    start = 0.5 * np.stack(zero_information_plan(inst))
    assert barrier.feasible(start)
    x0 = barrier.pack(start)
    tau = 2.5

    g, H = barrier.grad_hess(x0, tau)
    eps = 1e-6
    for i in range(x0.size):
        e = np.zeros_like(x0)
        e[i] = eps
        g_fd = (barrier.value(x0 + e, tau) - barrier.value(x0 - e, tau)) / (2 * eps)
        assert g[i] == pytest.approx(g_fd, rel=2e-5, abs=2e-5)
        gp, _ = barrier.grad_hess(x0 + e, tau)
        gm, _ = barrier.grad_hess(x0 - e, tau)
        assert np.allclose(H[:, i], (gp - gm) / (2 * eps),
                           rtol=2e-4, atol=2e-4)


def test_tolerance_override_controls_gap(rng):
    inst = random_instance(rng, n=1, T=6, budget_fraction=0.5)
    prob = build_problem(inst)
    loose = solve(prob, tol=SolverTolerances(rel_gap=1e-4, abs_gap=1e-4))
    tight = solve(prob, tol=SolverTolerances(rel_gap=1e-9, abs_gap=1e-10))
    assert tight.solver_stats.gap_bound < loose.solver_stats.gap_bound
    # both still near-optimal
    assert abs(tight.objective_nats - loose.objective_nats) < 1e-3


def test_dump_program(tmp_path, rng):
    inst = random_instance(rng, n=2, T=3)
    prob = build_problem(inst)
    path = tmp_path / "program.txt"
    dump_program(prob, path)
    text = path.read_text()
    assert text.startswith("maxdet-program 1\n")
    assert f"T {inst.T}" in text
    assert "matrix P10 0" in text
    assert "matrix Theta 3" in text
