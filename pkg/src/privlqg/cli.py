"""Command-line front end: design, sweep, simulate, verify.

Configuration is a single JSON document; matrices are row-major nested
arrays, and every time-varying sequence is either one matrix (broadcast
over t) or a length-T array of matrices.  Unknown fields are rejected.
All output files carry a schema_version field and are written atomically
(temp file + rename).  User-facing quantities are in bits.

Exit codes: 0 success, 1 verification failures, 2 invalid configuration
or dimension mismatch, 3 infeasible budget, 4 solver failure, 5 internal
error (trade-off monotonicity violation).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import infoflow, leakage, maxdet, simulate, synthesis
from .errors import (
    ConfigError,
    DimensionMismatch,
    Infeasible,
    MaxIterations,
    NonFiniteEntry,
    NotPositiveDefinite,
    NumericalBreakdown,
    OutOfRange,
    PrivLQGError,
)
from .model import make_cost, make_system, validate
from .riccati import backward_riccati

SCHEMA_VERSION = 1

_SYSTEM_KEYS = {"T", "A", "B", "SigmaW", "m1", "P10"}
_COST_KEYS = {"Q", "R", "delta", "include_mean_cost", "delta_net_of_constants"}
_SOLVER_KEYS = {"rel_gap", "abs_gap"}
_TOP_KEYS = {"schema_version", "system", "cost", "sweep", "simulate", "solver"}
_SWEEP_KEYS = {"delta_grid"}
_SIM_KEYS = {"trials", "seed"}


def _fmt(v):
    return f"{float(v):.17g}"


def _reject_unknown(mapping, allowed, where):
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"unknown field(s) in {where}: {sorted(unknown)}")


def _depth(value):
    d = 0
    while isinstance(value, list):
        if not value:
            return d + 1
        value = value[0]
        d += 1
    return d


def _matrix_sequence(value, T, name):
    """Scalar / flat list / matrix / list of matrices.

    A bare scalar or a single (nested-list) matrix broadcasts over t; a
    flat list of length T gives per-step scalars; a list of T matrices
    gives the full time-varying sequence.
    """
    d = _depth(value)
    if d == 0:
        return np.array([[float(value)]])
    if d == 1:
        if len(value) != T:
            raise ConfigError(
                f"{name}: a flat list must have length T={T} "
                f"(per-step scalars), got {len(value)}"
            )
        return [np.array([[float(v)]]) for v in value]
    if d == 2:
        return np.asarray(value, dtype=float)
    if d == 3:
        if len(value) != T:
            raise ConfigError(
                f"{name}: expected {T} matrices, got {len(value)}"
            )
        return [np.asarray(M, dtype=float) for M in value]
    raise ConfigError(f"{name}: nesting depth {d} not understood")


def _vector(value, name):
    d = _depth(value)
    if d == 0:
        return [float(value)]
    if d == 1:
        return [float(v) for v in value]
    raise ConfigError(f"{name}: expected a scalar or flat list")


def _matrix(value, name):
    d = _depth(value)
    if d == 0:
        return np.array([[float(value)]])
    if d == 2:
        return np.asarray(value, dtype=float)
    raise ConfigError(f"{name}: expected a scalar or nested-list matrix")


def load_config(path):
    """Parse and validate a run configuration; returns the raw dict too."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    _reject_unknown(raw, _TOP_KEYS, "config")
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(
            f"unsupported schema_version {raw.get('schema_version')!r}; "
            f"this reader accepts {SCHEMA_VERSION}"
        )
    for key in ("system", "cost"):
        if key not in raw:
            raise ConfigError(f"config is missing the '{key}' section")

    sysc = raw["system"]
    _reject_unknown(sysc, _SYSTEM_KEYS, "system")
    for key in _SYSTEM_KEYS:
        if key not in sysc:
            raise ConfigError(f"system section is missing '{key}'")
    costc = raw["cost"]
    _reject_unknown(costc, _COST_KEYS, "cost")
    for key in ("Q", "R", "delta"):
        if key not in costc:
            raise ConfigError(f"cost section is missing '{key}'")
    _reject_unknown(raw.get("sweep", {}), _SWEEP_KEYS, "sweep")
    _reject_unknown(raw.get("simulate", {}), _SIM_KEYS, "simulate")
    _reject_unknown(raw.get("solver", {}), _SOLVER_KEYS, "solver")

    try:
        T = int(sysc["T"])
        model = make_system(
            T,
            _matrix_sequence(sysc["A"], T, "A"),
            _matrix_sequence(sysc["B"], T, "B"),
            _matrix_sequence(sysc["SigmaW"], T, "SigmaW"),
            _vector(sysc["m1"], "m1"),
            _matrix(sysc["P10"], "P10"),
        )
        cost = make_cost(
            T,
            _matrix_sequence(costc["Q"], T, "Q"),
            _matrix_sequence(costc["R"], T, "R"),
            float(costc["delta"]),
            include_mean_cost=bool(costc.get("include_mean_cost", False)),
            delta_net_of_constants=bool(
                costc.get("delta_net_of_constants", False)
            ),
        )
        instance = validate(model, cost)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed numeric field: {exc}") from None
    return instance, raw


def solver_tolerances(raw, override=None):
    kw = dict(raw.get("solver", {}))
    if override is not None:
        kw["rel_gap"] = float(override)
    return maxdet.SolverTolerances(**{k: float(v) for k, v in kw.items()})


def _atomic_write_text(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_json(path, obj):
    _atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_csv(path, rows):
    body = "\n".join(",".join(r) for r in rows)
    _atomic_write_text(path, f"# schema_version {SCHEMA_VERSION}\n{body}\n")


def _mat_list(seq):
    return [np.asarray(M).tolist() for M in seq]


def scalar_snr_schedule(design):
    """Per-step C_t^2 / SigmaV_t for scalar instances, 0 when r_t = 0."""
    out = []
    for C, V in zip(design.C, design.SigmaV):
        if C.shape[0] == 0:
            out.append(0.0)
        else:
            out.append(float((C[0, 0] ** 2) / V[0, 0]))
    return out


def design_payload(instance, raw_config, design, report):
    plan = design.plan
    stats = plan.solver_stats
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "design",
        "config": {"system": raw_config["system"], "cost": raw_config["cost"]},
        "filter": {
            "C": _mat_list(design.C),
            "SigmaV": _mat_list(design.SigmaV),
            "L": _mat_list(design.L),
            "K": _mat_list(design.K),
            "ranks": list(design.ranks),
        },
        "plan": {
            "Pfilt": _mat_list(plan.Pfilt),
            "Pi": _mat_list(plan.Pi),
            "Ppred": _mat_list(plan.Ppred),
            "objective_nats": plan.objective_nats,
        },
        "privacy": {
            "total_bits": report.total_bits,
            "per_step_bits": list(report.per_step_bits),
            "di_x_to_u_bits": report.di_x_to_u,
            "di_x_to_y_given_u_bits": report.di_x_to_y_given_u,
            "distortion_rate_floor": list(report.distortion_rate_floor),
        },
        "solver_stats": {
            "status": stats.status,
            "outer_iterations": stats.outer_iterations,
            "newton_iterations": stats.newton_iterations,
            "gap_bound_nats": stats.gap_bound,
            "budget_residual": stats.budget_residual,
        },
    }


def load_design(path, instance):
    """Rebuild a FilterDesign from a result JSON; checks dimensions."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"design file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(
            f"{path}: unsupported schema_version {raw.get('schema_version')!r}"
        )
    if raw.get("kind") != "design":
        raise ConfigError(f"{path}: not a design result file")
    n, m, T = instance.n, instance.m, instance.T
    try:
        filt = raw["filter"]
        plan_raw = raw["plan"]
        C = tuple(np.asarray(M, dtype=float).reshape(-1, n) for M in filt["C"])
        SigmaV = tuple(
            np.asarray(M, dtype=float).reshape(C[t].shape[0], C[t].shape[0])
            for t, M in enumerate(filt["SigmaV"])
        )
        L = tuple(
            np.asarray(M, dtype=float).reshape(n, C[t].shape[0])
            for t, M in enumerate(filt["L"])
        )
        K = tuple(np.asarray(M, dtype=float).reshape(m, n) for M in filt["K"])
        plan = maxdet.CovariancePlan(
            Pfilt=tuple(np.asarray(M, dtype=float).reshape(n, n)
                        for M in plan_raw["Pfilt"]),
            Pi=tuple(np.asarray(M, dtype=float).reshape(n, n)
                     for M in plan_raw["Pi"]),
            Ppred=tuple(np.asarray(M, dtype=float).reshape(n, n)
                        for M in plan_raw["Ppred"]),
            objective_nats=float(plan_raw["objective_nats"]),
            solver_stats=maxdet.SolverStats(status="loaded"),
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed design payload: {exc}") from None
    if len(C) != T:
        raise DimensionMismatch(
            f"{path}: design horizon {len(C)} != instance horizon {T}"
        )
    per_step = synthesis.per_step_privacy_bits(plan)
    return synthesis.FilterDesign(
        C=C, SigmaV=SigmaV, L=L, K=K, plan=plan,
        privacy_bits=float(sum(per_step)), privacy_per_step_bits=per_step,
    )


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_design(args):
    instance, raw = load_config(args.config)
    tol = solver_tolerances(raw, args.tolerance)
    design = synthesis.design(instance, tol=tol)
    report = infoflow.build_privacy_report(design, instance)

    out = args.out_dir
    os.makedirs(out, exist_ok=True)
    _write_json(os.path.join(out, "design.json"),
                design_payload(instance, raw, design, report))

    snr = scalar_snr_schedule(design) if instance.n == 1 else None
    rows = [["t", "r_t", "snr_t", "gamma_bits"]]
    for t in range(instance.T):
        rows.append([
            str(t + 1),
            str(design.ranks[t]),
            _fmt(snr[t]) if snr is not None else "",
            _fmt(design.privacy_per_step_bits[t]),
        ])
    _write_csv(os.path.join(out, "schedule.csv"), rows)

    if not args.no_plots:
        from . import plots

        steps = list(range(1, instance.T + 1))
        plots.save_design_figure(
            steps,
            snr if snr is not None else [0.0] * instance.T,
            list(design.privacy_per_step_bits),
            os.path.join(out, "schedule.png"),
        )
    print(f"privacy loss: {design.privacy_bits:.6f} bits over T={instance.T}; "
          f"results in {out}")
    return 0


def _parse_grid(text):
    if ":" in text:
        lo, hi, num = text.split(":")
        grid = np.linspace(float(lo), float(hi), int(num))
        return [float(v) for v in grid]
    return [float(v) for v in text.split(",")]


def cmd_sweep(args):
    instance, raw = load_config(args.config)
    tol = solver_tolerances(raw, args.tolerance)
    if args.delta_grid:
        grid = _parse_grid(args.delta_grid)
    else:
        grid = [float(v) for v in raw.get("sweep", {}).get("delta_grid", [])]
    if not grid:
        raise ConfigError("no delta grid given (flag --delta-grid or "
                          "config sweep.delta_grid)")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("delta grid must be strictly increasing")

    from dataclasses import replace

    rows = [["delta", "privacy_bits", "status"]]
    bits = []
    feasible = []
    for delta in grid:
        inst_d = validate(
            instance.model, replace(instance.cost, delta=float(delta))
        )
        try:
            plan = maxdet.solve(maxdet.build_problem(inst_d), tol=tol)
            val = plan.objective_nats / np.log(2.0)
            rows.append([_fmt(delta), _fmt(val), "ok"])
            bits.append(val)
            feasible.append(True)
        except Infeasible:
            rows.append([_fmt(delta), "", "infeasible"])
            bits.append(float("nan"))
            feasible.append(False)

    feas_bits = [b for b, ok in zip(bits, feasible) if ok]
    for a, b in zip(feas_bits, feas_bits[1:]):
        if b > a + 1e-6:
            print(
                "error: internal-error: privacy loss increased along the "
                f"delta grid ({a!r} -> {b!r})",
                file=sys.stderr,
            )
            return 5

    out = args.out_dir
    os.makedirs(out, exist_ok=True)
    _write_csv(os.path.join(out, "sweep.csv"), rows)
    if not args.no_plots:
        from . import plots

        plots.save_sweep_figure(grid, bits, feasible,
                                os.path.join(out, "sweep.png"))
    print(f"swept {len(grid)} budgets; results in {out}")
    return 0


def cmd_simulate(args):
    instance, raw = load_config(args.config)
    design = load_design(args.design, instance)
    trials = args.trials or int(raw.get("simulate", {}).get("trials", 1000))
    seed = args.seed if args.seed is not None else int(
        raw.get("simulate", {}).get("seed", 0)
    )

    problem = maxdet.build_problem(instance)
    trace = simulate.simulate_once(design, instance, seed)
    summary = simulate.monte_carlo(design, instance, trials, seed,
                                   problem=problem)

    out = args.out_dir
    os.makedirs(out, exist_ok=True)
    _write_csv(os.path.join(out, "trace.csv"),
               simulate.trace_to_csv_rows(trace))
    _write_json(os.path.join(out, "summary.json"), {
        "schema_version": SCHEMA_VERSION,
        "kind": "simulation-summary",
        "trials": summary.trials,
        "seed": seed,
        "mean_cost": summary.mean_cost,
        "standard_error": summary.standard_error,
        "predicted_cost": summary.predicted_cost,
        "cost_consistent_3se": summary.cost_consistent_3se,
        "mean_squared_estimation_error":
            list(summary.mean_squared_estimation_error),
        "empirical_snr": list(summary.empirical_snr),
        "design_snr": list(summary.design_snr),
    })
    if not args.no_plots:
        from . import plots

        plots.save_trace_figure(trace, os.path.join(out, "trace.png"))
    verdict = "consistent" if summary.cost_consistent_3se else "INCONSISTENT"
    print(f"mean cost {summary.mean_cost:.4f} vs predicted "
          f"{summary.predicted_cost:.4f} ({verdict} at 3 SE); "
          f"results in {out}")
    return 0


# -- verify suites ----------------------------------------------------------


def _suite_maxdet(rng):
    failures = []
    for k in range(3):
        n = int(rng.integers(1, 3))
        T = int(rng.integers(2, 8))
        A = [rng.normal(size=(n, n)) * 0.7 for _ in range(T)]
        B = [rng.normal(size=(n, n)) for _ in range(T)]
        W = [np.eye(n) * 0.5 for _ in range(T)]
        Q = [np.eye(n) for _ in range(T)]
        R = [np.eye(n) * 2.0 for _ in range(T)]
        inst = validate(
            make_system(T, A, B, W, np.zeros(n), np.eye(n)),
            make_cost(T, Q, R, 0.2 + 0.4 * k, delta_net_of_constants=True),
        )
        prob = maxdet.build_problem(inst)
        plan = maxdet.solve(prob)
        rep = maxdet.verify_plan(prob, plan)
        if not rep.passed:
            failures.append(f"maxdet[{k}]: {rep.failing()}")
    return failures


def _suite_lemma1(rng):
    from dataclasses import replace as dc_replace

    from .model import scalar_instance

    failures = []
    inst = scalar_instance(T=5, p10=1.0, m1=2.0, delta=1.2,
                           delta_net_of_constants=True)
    des = synthesis.design(inst)
    diu, diy = infoflow.directed_info_joint_oracle(des, inst)
    if abs(diu - diy) > 1e-6:
        failures.append(f"lemma2 equality broke: {diu} vs {diy}")
    if abs(diy - des.privacy_bits) > 1e-6:
        failures.append(f"oracle vs plan formula: {diy} vs {des.privacy_bits}")
    pert = dc_replace(des, L=tuple(1.1 * L for L in des.L))
    diu_p, diy_p = infoflow.directed_info_joint_oracle(pert, inst)
    if diu_p > diy_p + 1e-9:
        failures.append(f"lemma1 inequality broke: {diu_p} > {diy_p}")
    return failures


def _suite_leakage(rng):
    failures = []
    for k in range(200):
        nx = int(rng.integers(2, 7))
        ny = int(rng.integers(2, 7))
        p = rng.random((nx, ny))
        joint = leakage.DiscreteJoint(pXY=p / p.sum())
        try:
            leakage.leakage_logloss(joint)
        except AssertionError as exc:
            failures.append(f"leakage identity[{k}]: {exc}")
            break
    # random sufficient statistic: a permutation
    for k in range(20):
        nx = int(rng.integers(2, 7))
        p = rng.random((nx, nx))
        joint = leakage.DiscreteJoint(pXY=p / p.sum())
        perm = rng.permutation(nx)
        rep = leakage.check_data_processing(
            joint, leakage.StatisticMap(table=tuple(int(v) for v in perm))
        )
        if not rep.sufficiency_holds or abs(rep.gap_bits) > 1e-10:
            failures.append(f"permutation statistic[{k}] not leakage-neutral")
            break
    return failures


def _suite_distortion(rng):
    from .model import scalar_instance

    failures = []
    inst = scalar_instance(T=6, p10=2.0, m1=1.0, delta=1.5,
                           delta_net_of_constants=True)
    des = synthesis.design(inst)
    for t in range(1, inst.T + 1):
        floor = infoflow.distortion_rate_floor(des.plan, t)
        filt = float(des.plan.Pfilt[t - 1][0, 0])
        if abs(floor - filt) > 1e-9 * (1.0 + filt):
            failures.append(f"distortion-rate equality broke at t={t}")
    return failures


_SUITES = {
    "maxdet": _suite_maxdet,
    "lemma1": _suite_lemma1,
    "leakage": _suite_leakage,
    "distortion": _suite_distortion,
}


def _verify_design_file(args):
    instance, raw = load_config(args.config)
    design = load_design(args.design, instance)
    problem = maxdet.build_problem(instance)
    failures = []

    rep = maxdet.verify_plan(problem, design.plan)
    if not rep.passed:
        failures.extend(f"{args.design}: plan check {nm}"
                        for nm in rep.failing())
    # factorization identity of the stored sensor
    from .linalg import inv_pd, spectral_scale

    for t in range(instance.T):
        C, V = design.C[t], design.SigmaV[t]
        lhs = C.T @ inv_pd(V) @ C if C.shape[0] else np.zeros((instance.n,) * 2)
        rhs = inv_pd(design.plan.Pfilt[t]) - inv_pd(design.plan.Ppred[t])
        if np.max(np.abs(lhs - rhs)) > 1e-7 * spectral_scale(rhs):
            failures.append(f"{args.design}: sensor factorization at t={t + 1}")
    # gains echo the Riccati recursion
    ricc = backward_riccati(instance)
    for t in range(instance.T):
        if np.max(np.abs(ricc.K[t] - design.K[t])) > 1e-8:
            failures.append(f"{args.design}: feedback gain mismatch at t={t + 1}")
            break
    for name in failures:
        print(f"FAIL  {name}")
    if failures:
        return 1
    print(f"PASS  {args.design}: plan certificates, sensor factorization, "
          "gains")
    return 0


def cmd_verify(args):
    if args.design:
        return _verify_design_file(args)
    scopes = list(_SUITES) if args.scope == "all" else [args.scope]
    unknown = [s for s in scopes if s not in _SUITES]
    if unknown:
        raise ConfigError(f"unknown verify scope {unknown}; "
                          f"choose from {['all'] + list(_SUITES)}")
    rng = np.random.default_rng(20260810)
    overall = []
    for name in scopes:
        failures = _SUITES[name](rng)
        status = "PASS" if not failures else "FAIL"
        print(f"{status}  {name}")
        for f in failures:
            print(f"      {f}")
        overall.extend(failures)
    return 0 if not overall else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="privlqg",
        description="Design and analyze output privacy filters for "
                    "cloud-based LQG control.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="JSON run config")
        sp.add_argument("--out-dir", default=".", help="output directory")
        sp.add_argument("--tolerance", type=float, default=None,
                        help="solver relative-gap override")
        sp.add_argument("--no-plots", action="store_true",
                        help="skip figure rendering")

    sp = sub.add_parser("design", help="synthesize the optimal joint design")
    common(sp)
    sp.set_defaults(func=cmd_design)

    sp = sub.add_parser("sweep", help="trace the privacy/cost trade-off")
    common(sp)
    sp.add_argument("--delta-grid", default=None,
                    help="comma list or lo:hi:num")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("simulate", help="Monte Carlo closed-loop rollouts")
    common(sp)
    sp.add_argument("--design", required=True, help="design.json to simulate")
    sp.add_argument("--trials", type=int, default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("verify", help="run invariant suites or re-verify "
                                       "a stored result")
    sp.add_argument("--scope", default="all",
                    choices=["all", *_SUITES], help="suite selection")
    sp.add_argument("--config", default=None, help="config for --design")
    sp.add_argument("--design", default=None,
                    help="re-verify a stored design.json")
    sp.set_defaults(func=cmd_verify)

    return parser


_EXIT_CODES = (
    (ConfigError, 2, "invalid-config"),
    (DimensionMismatch, 2, "dimension-mismatch"),
    (NotPositiveDefinite, 2, "not-positive-definite"),
    (NonFiniteEntry, 2, "non-finite-entry"),
    (OutOfRange, 2, "out-of-range"),
    (Infeasible, 3, "infeasible"),
    (MaxIterations, 4, "solver-failure"),
    (NumericalBreakdown, 4, "solver-failure"),
)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "verify" and args.design and not args.config:
        print("error: invalid-config: --design requires --config",
              file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except PrivLQGError as exc:
        for klass, code, tag in _EXIT_CODES:
            if isinstance(exc, klass):
                print(f"error: {tag}: {exc}", file=sys.stderr)
                return code
        print(f"error: internal-error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
