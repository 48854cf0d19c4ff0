"""The diagnostic battery behind the ``check`` subcommand.

Each check is a pure function of the stored run (config + trajectory
CSVs) and produces ``{check_name, pass, statistics}``.  Only the checks
applicable to the run's solver/schedule/objective combination execute;
the command exits 0 iff every applicable check passes.
"""

from __future__ import annotations

import numpy as np

from . import diagnostics as diag
from .directions import make_rng
from .experiment import ExperimentConfig
from .solvers import Trajectory


def _result(name: str, ok: bool, stats: dict) -> dict:
    return {"check_name": name, "pass": bool(ok), "statistics": stats}


def check_trajectory_invariants(config: ExperimentConfig,
                                trajs: list[Trajectory]) -> dict:
    """Grid monotonicity of indices/min/evals plus oracle-call accounting."""
    bad = []
    for traj in trajs:
        try:
            traj.validate()
        except ValueError as exc:
            bad.append({"run_index": traj.run_index, "error": str(exc)})
            continue
        expected = config.expected_final_evals(int(traj.t[-1]))
        if int(traj.evals[-1]) != expected:
            bad.append({"run_index": traj.run_index,
                        "error": f"evals {int(traj.evals[-1])} != expected {expected}"})
    return _result("trajectory_invariants", not bad,
                   {"trajectories": len(trajs), "violations": bad})


def check_monotone_f(trajs: list[Trajectory]) -> dict:
    """Recorded f must be exactly non-increasing (three-point and gld)."""
    bad = [t.run_index for t in trajs if np.any(np.diff(t.f_value) > 0)]
    return _result("monotone_f", not bad,
                   {"trajectories": len(trajs), "violating_runs": bad})


def check_lemma1_monte_carlo(config: ExperimentConfig, n_samples: int = 20000,
                             n_points: int = 4) -> dict:
    """Expected-decrease bound at a few seeded points of the config's objective."""
    obj = config.build_objective()
    sampler = config.build_sampler()
    rng = make_rng(int(config.digest()[:15], 16))
    theta0 = config.initial_point()
    cases = []
    ok = True
    for k in range(n_points):
        theta = theta0 if k == 0 else theta0 + rng.standard_normal(obj.dim)
        for alpha in (1e-2, 1e-1):
            res = diag.check_lemma1(obj, theta, alpha, sampler, n_samples, rng)
            ok &= res.holds
            cases.append({"point": k, "alpha": alpha, "lhs": res.lhs_estimate,
                          "stderr": res.stderr, "rhs": res.rhs_bound,
                          "holds": res.holds})
    return _result("lemma1_monte_carlo", ok,
                   {"n_samples": n_samples, "cases": cases})


def check_lemma5_replay(config: ExperimentConfig) -> dict:
    """Re-run every directional trajectory with tracing and replay the bound."""
    total = passed = 0
    per = []
    for index in range(config.trajectories):
        traj = config.run_one(index, trace=True)
        obj = config.build_objective()
        schedule = config.build_schedule(obj, config.build_sampler())
        p, n = diag.check_lemma5_run(obj, traj.steps, schedule.h)
        passed += p
        total += n
        per.append({"run_index": index, "passed": p, "steps": n})
    return _result("lemma5_replay", passed == total,
                   {"steps_total": total, "steps_passed": passed, "runs": per})


def check_thm4_bound(config: ExperimentConfig, trajs: list[Trajectory]) -> dict:
    """Cross-seed mean gap <= a / T + 3 stderr at every recorded index."""
    obj = config.build_objective()
    mu_d = config.build_sampler().constants(obj.dim).mu_d
    consts = diag.thm4_constants(obj, config.initial_point(), mu_d,
                                 alpha=config.schedule["alpha"])
    grid, mean, stderr = diag.expectation_curve(trajs, "f_gap", f_star=obj.f_star)
    bound = consts.a / grid + 3.0 * stderr
    worst = int(np.argmax(mean - bound))
    ok = bool(np.all(mean <= bound))
    return _result("thm4_bound", ok, {
        "radius": consts.radius, "alpha": consts.alpha, "a": consts.a,
        "worst_t": int(grid[worst]), "worst_mean": float(mean[worst]),
        "worst_bound": float(bound[worst]),
    })


def check_rate_fit_min_grad(config: ExperimentConfig,
                            trajs: list[Trajectory]) -> dict:
    """Tail exponent of the mean best-gradient curve vs. the schedule's rate."""
    p = config.schedule["exponent"]
    grid, mean, _ = diag.expectation_curve(trajs, "min_grad_norm")
    fit = diag.rate_fit(grid, mean)
    threshold = -(1.0 - p) + 0.09
    return _result("rate_fit_min_grad", fit.exponent_estimate <= threshold, {
        "exponent": fit.exponent_estimate, "threshold": threshold,
        "r_squared": fit.r_squared, "window": fit.window,
    })


def check_bounded_rate_tail(config: ExperimentConfig,
                            trajs: list[Trajectory]) -> dict:
    """T^(1-p) * min grad norm must not trend upward over the tail."""
    p = config.schedule["exponent"]
    res = diag.bounded_rate_check(trajs, exponent=1.0 - p)
    rises = [entry["tail_rise"] for entry in res.per_trajectory]
    return _result("bounded_rate_tail", res.is_nonincreasing_tail, {
        "exponent": 1.0 - p, "max_tail_value": res.max_tail_value,
        "max_tail_rise": max(rises), "trajectories": len(trajs),
    })


def check_last_iterate_decay(trajs: list[Trajectory],
                             ratio_threshold: float = 0.1) -> dict:
    """Median gradient norm over the last 10% of the grid vs. the first 10%.

    Also requires the cross-seed mean gradient norm at the final record
    to lie strictly below its value near 1% of the horizon.
    """
    ratios = [diag.median_decay_ratio(t.grad_norm) for t in trajs]
    grid, mean, _ = diag.expectation_curve(trajs, "grad_norm")
    early = int(np.argmin(np.abs(grid - grid[-1] / 100.0)))
    mean_drops = bool(mean[-1] < mean[early])
    ok = max(ratios) <= ratio_threshold and mean_drops
    return _result("last_iterate_decay", ok, {
        "max_ratio": max(ratios), "ratio_threshold": ratio_threshold,
        "mean_at_early_t": float(mean[early]), "early_t": int(grid[early]),
        "mean_at_final_t": float(mean[-1]), "final_t": int(grid[-1]),
        "mean_drops": mean_drops,
    })


def check_geometric_rate(config: ExperimentConfig, trajs: list[Trajectory],
                         slack: float = 0.003) -> dict:
    """Geometric contraction of the mean gap vs. 1 - mu_D^2 mu / L."""
    obj = config.build_objective()
    mu_d = config.build_sampler().constants(obj.dim).mu_d
    q = mu_d * mu_d * obj.mu / obj.smoothness
    schedule = config.build_schedule(obj, config.build_sampler())
    grid, mean, _ = diag.expectation_curve(trajs, "f_gap", f_star=obj.f_star)
    rho = diag.geometric_rate_fit(grid, mean)
    gap1 = float(mean[0])
    rhs = diag.thm7_rhs(int(grid[-1]), gap1, mu_d, obj.mu, obj.smoothness,
                        schedule.h)
    bound_ok = bool(mean[-1] <= rhs)
    rho_ok = rho <= 1.0 - q + slack
    return _result("geometric_rate", rho_ok and bound_ok, {
        "rho": rho, "rho_bound": 1.0 - q + slack, "h": schedule.h,
        "final_t": int(grid[-1]), "final_mean_gap": float(mean[-1]),
        "thm7_rhs": rhs,
    })


def check_per_seed_geometric(config: ExperimentConfig, trajs: list[Trajectory],
                             s: float = 0.9) -> dict:
    """Per-trajectory almost-sure rate check at s = 0.9."""
    obj = config.build_objective()
    mu_d = config.build_sampler().constants(obj.dim).mu_d
    bad = [t.run_index for t in trajs
           if not diag.thm6_trajectory_check(t, obj.f_star, mu_d, obj.mu,
                                             obj.smoothness, s=s)]
    return _result("per_seed_geometric", not bad,
                   {"s": s, "trajectories": len(trajs), "violating_runs": bad})


def run_checks(config: ExperimentConfig, trajs: list[Trajectory]) -> dict:
    """Run every check applicable to this run and bundle the verdicts."""
    solver = config.solver["name"]
    schedule = None if config.schedule is None else config.schedule["name"]
    obj = config.build_objective()

    results = [check_trajectory_invariants(config, trajs)]
    if solver in ("stp", "gld"):
        results.append(check_monotone_f(trajs))
    if solver == "stp":
        results.append(check_lemma1_monte_carlo(config))
        if schedule == "directional":
            results.append(check_lemma5_replay(config))
            if obj.mu > 0.0 and obj.f_star is not None and len(trajs) >= 2:
                results.append(check_geometric_rate(config, trajs))
                results.append(check_per_seed_geometric(config, trajs))
        if schedule == "harmonic" and obj.f_star is not None and len(trajs) >= 2:
            try:
                results.append(check_thm4_bound(config, trajs))
            except ValueError as exc:
                results.append(_result("thm4_bound", False, {"error": str(exc)}))
        # rate statistics need a long horizon to rise above sampling noise
        if (schedule == "power" and 0.5 < config.schedule["exponent"] < 1.0
                and len(trajs) >= 2 and len(trajs[0]) >= 20
                and config.iterations >= 10_000):
            results.append(check_rate_fit_min_grad(config, trajs))
            results.append(check_bounded_rate_tail(config, trajs))
            results.append(check_last_iterate_decay(trajs))

    return {
        "config_digest": config.digest(),
        "checks": results,
        "all_pass": all(r["pass"] for r in results),
    }
