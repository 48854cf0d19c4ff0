"""Experiment configs, the trajectory batch runner, and file formats.

A single JSON document describes a batch of seeded runs.  Trajectory
``k`` is seeded with ``base_seed XOR splitmix64(k)``, so results are
identical whether trajectories execute serially or across a process
pool.  Outputs per run directory:

* ``trajectory_NNNN.csv``  one per trajectory (schema below)
* ``aggregate.csv``        one summary row per trajectory
* ``report.json``          config echo, digest, per-trajectory summaries

CSV schema, in this exact column order::

    run_index, seed, t, f_value, grad_norm, min_grad_norm,
    alpha_t (empty when undefined), evals, elapsed_ns

Floats are serialized with 17 significant digits so files round-trip
losslessly.  Re-running a config reproduces every byte except the
elapsed_ns column.
"""

from __future__ import annotations

import concurrent.futures
import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .directions import make_sampler, trajectory_seed
from .errors import ConfigError
from .objectives import make_objective
from .schedules import (
    DEFAULT_OFFSET_FLOOR,
    DirectionalSchedule,
    HarmonicSchedule,
    PowerSchedule,
    thm7_h,
)
from .solvers import GLD, RGF, STP, Trajectory, gld_radii, run_trajectory

OUTPUT_DIR_ENV = "STPBENCH_OUTPUT_DIR"

CSV_COLUMNS = ("run_index", "seed", "t", "f_value", "grad_norm",
               "min_grad_norm", "alpha_t", "evals", "elapsed_ns")

_OBJECTIVE_NAMES = ("nesterov_chain", "sphere_quadratic", "huber_chain")
_SOLVER_NAMES = ("stp", "rgf", "gld")
_SCHEDULE_NAMES = ("power", "harmonic", "directional")
_DISTRIBUTION_NAMES = ("unit_sphere", "scaled_gaussian")
_INIT_KINDS = ("zeros", "fill", "first_coord", "coords")


def _need(section: dict, key: str, context: str):
    if key not in section:
        raise ConfigError(f"{context}: missing key {key!r}")
    return section[key]


@dataclass(frozen=True)
class ExperimentConfig:
    objective: dict
    solver: dict
    schedule: dict | None
    distribution: dict
    theta_init: dict
    trajectories: int
    iterations: int
    base_seed: int
    record_every: int
    output_dir: str

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        obj = dict(_need(raw, "objective", "config"))
        name = _need(obj, "name", "objective")
        if name not in _OBJECTIVE_NAMES:
            raise ConfigError(f"objective.name: unknown objective {name!r}")
        dim = int(_need(obj, "dim", "objective"))
        if dim < 1:
            raise ConfigError("objective.dim: must be >= 1")
        objective = {"name": name, "dim": dim}

        sol = dict(_need(raw, "solver", "config"))
        sname = _need(sol, "name", "solver")
        if sname not in _SOLVER_NAMES:
            raise ConfigError(f"solver.name: unknown solver {sname!r}")
        if sname == "rgf":
            solver = {"name": "rgf",
                      "mu_fd": float(_need(sol, "mu_fd", "solver")),
                      "h_step": float(_need(sol, "h_step", "solver"))}
            if solver["mu_fd"] <= 0 or solver["h_step"] <= 0:
                raise ConfigError("solver.mu_fd / solver.h_step: must be positive")
        elif sname == "gld":
            solver = {"name": "gld",
                      "r_min": float(_need(sol, "r_min", "solver")),
                      "r_max": float(_need(sol, "r_max", "solver"))}
            if not (0 < solver["r_min"] < solver["r_max"]):
                raise ConfigError("solver.r_min / solver.r_max: need 0 < r_min < r_max")
        else:
            solver = {"name": "stp"}

        schedule = None
        if sname == "stp":
            sch = dict(_need(raw, "schedule", "config (stp solver)"))
            kname = _need(sch, "name", "schedule")
            if kname not in _SCHEDULE_NAMES:
                raise ConfigError(f"schedule.name: unknown schedule {kname!r}")
            if kname == "power":
                schedule = {"name": "power",
                            "alpha": float(_need(sch, "alpha", "schedule")),
                            "exponent": float(_need(sch, "exponent", "schedule"))}
            elif kname == "harmonic":
                schedule = {"name": "harmonic",
                            "alpha": float(_need(sch, "alpha", "schedule"))}
            else:
                h = sch.get("h")
                schedule = {"name": "directional",
                            "h": None if h is None else float(h),
                            "offset_floor": float(sch.get("offset_floor",
                                                          DEFAULT_OFFSET_FLOOR))}
        elif "schedule" in raw and raw["schedule"] is not None:
            raise ConfigError("schedule: only the stp solver takes a schedule")

        dist = dict(raw.get("distribution") or {"name": "unit_sphere"})
        dname = _need(dist, "name", "distribution")
        if dname not in _DISTRIBUTION_NAMES:
            raise ConfigError(f"distribution.name: unknown distribution {dname!r}")
        distribution = {"name": dname}

        init = dict(raw.get("theta_init") or {"kind": "zeros"})
        ikind = init.get("kind", "zeros")
        if ikind not in _INIT_KINDS:
            raise ConfigError(f"theta_init.kind: unknown kind {ikind!r}")
        if ikind == "zeros":
            theta_init = {"kind": "zeros"}
        elif ikind in ("fill", "first_coord"):
            theta_init = {"kind": ikind, "value": float(_need(init, "value", "theta_init"))}
        else:
            values = [float(v) for v in _need(init, "values", "theta_init")]
            if len(values) != dim:
                raise ConfigError("theta_init.values: length must equal objective.dim")
            theta_init = {"kind": "coords", "values": values}

        trajectories = int(_need(raw, "trajectories", "config"))
        iterations = int(_need(raw, "iterations", "config"))
        base_seed = int(_need(raw, "base_seed", "config"))
        record_every = int(raw.get("record_every", 100))
        output_dir = str(_need(raw, "output_dir", "config"))
        if trajectories < 1:
            raise ConfigError("trajectories: must be >= 1")
        if iterations < 1:
            raise ConfigError("iterations: must be >= 1")
        if record_every < 1:
            raise ConfigError("record_every: must be >= 1")
        if base_seed < 0:
            raise ConfigError("base_seed: must be a nonnegative 64-bit integer")

        cfg = cls(objective=objective, solver=solver, schedule=schedule,
                  distribution=distribution, theta_init=theta_init,
                  trajectories=trajectories, iterations=iterations,
                  base_seed=base_seed, record_every=record_every,
                  output_dir=output_dir)
        cfg.build_components()  # fail fast on cross-field constraints
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def canonical(self) -> dict:
        return {
            "objective": self.objective,
            "solver": self.solver,
            "schedule": self.schedule,
            "distribution": self.distribution,
            "theta_init": self.theta_init,
            "trajectories": self.trajectories,
            "iterations": self.iterations,
            "base_seed": self.base_seed,
            "record_every": self.record_every,
            "output_dir": self.output_dir,
        }

    def canonical_text(self) -> str:
        return json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()

    # component construction -------------------------------------------------

    def build_objective(self):
        return make_objective(self.objective["name"], self.objective["dim"])

    def build_sampler(self):
        return make_sampler(self.distribution["name"])

    def build_schedule(self, obj, sampler):
        sch = self.schedule
        if sch is None:
            return None
        if sch["name"] == "power":
            return PowerSchedule(alpha=sch["alpha"], exponent=sch["exponent"])
        if sch["name"] == "harmonic":
            return HarmonicSchedule(alpha=sch["alpha"])
        h = sch["h"]
        if h is None:
            if obj.mu <= 0.0:
                raise ConfigError(
                    "schedule.h: default requires a strongly convex objective"
                )
            h = thm7_h(sampler.constants(obj.dim).mu_d, obj.mu, obj.smoothness)
        return DirectionalSchedule(smoothness=obj.smoothness, h=h,
                                   offset_floor=sch["offset_floor"])

    def build_components(self):
        obj = self.build_objective()
        sampler = self.build_sampler()
        schedule = self.build_schedule(obj, sampler)
        name = self.solver["name"]
        if name == "stp":
            kind = STP(sampler=sampler, schedule=schedule)
        elif name == "rgf":
            kind = RGF(mu_fd=self.solver["mu_fd"], h_step=self.solver["h_step"])
        else:
            kind = GLD(r_min=self.solver["r_min"], r_max=self.solver["r_max"])
        return obj, kind

    def initial_point(self) -> np.ndarray:
        dim = self.objective["dim"]
        init = self.theta_init
        if init["kind"] == "zeros":
            return np.zeros(dim)
        if init["kind"] == "fill":
            return np.full(dim, init["value"])
        if init["kind"] == "first_coord":
            theta = np.zeros(dim)
            theta[0] = init["value"]
            return theta
        return np.array(init["values"], dtype=float)

    def trajectory_meta(self) -> dict:
        obj = self.build_objective()
        return {
            "objective": self.objective["name"],
            "dim": self.objective["dim"],
            "solver": self.solver["name"],
            "schedule": None if self.schedule is None else self.schedule["name"],
            "distribution": self.distribution["name"],
            "f_star": obj.f_star,
        }

    def run_one(self, index: int, trace: bool = False) -> Trajectory:
        obj, kind = self.build_components()
        seed = trajectory_seed(self.base_seed, index)
        return run_trajectory(kind, obj, self.initial_point(), self.iterations,
                              seed, self.record_every, trace=trace,
                              run_index=index, meta=self.trajectory_meta())

    def expected_final_evals(self, final_t: int) -> int:
        """Oracle-call count implied by the final recorded iterate index."""
        steps = final_t - 1
        name = self.solver["name"]
        if name == "stp":
            per = 3 if self.schedule and self.schedule["name"] == "directional" else 2
        elif name == "rgf":
            per = 2
        else:
            per = len(gld_radii(self.solver["r_min"], self.solver["r_max"]))
        return 1 + per * steps


def _trajectory_job(canon: dict, index: int) -> Trajectory:
    return ExperimentConfig.from_dict(canon).run_one(index)


def resolve_output_dir(config: ExperimentConfig,
                       override: str | None = None) -> Path:
    if override is not None:
        return Path(override)
    env = os.environ.get(OUTPUT_DIR_ENV)
    if env:
        return Path(env)
    return Path(config.output_dir)


def run_experiment(config: ExperimentConfig, threads: int = 1,
                   output_dir: str | None = None) -> tuple[list[Trajectory], dict]:
    """Execute all trajectories, write CSVs and the JSON report."""
    if threads < 1:
        raise ValueError("threads must be >= 1")
    out = resolve_output_dir(config, output_dir)
    out.mkdir(parents=True, exist_ok=True)

    indices = list(range(config.trajectories))
    if threads == 1 or config.trajectories == 1:
        trajs = [config.run_one(i) for i in indices]
    else:
        canon = config.canonical()
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
            trajs = list(pool.map(_trajectory_job, [canon] * len(indices), indices))

    files = []
    for traj in trajs:
        name = f"trajectory_{traj.run_index:04d}.csv"
        write_trajectory_csv(traj, out / name)
        files.append(name)
    write_aggregate_csv(trajs, out / "aggregate.csv")
    report = build_report(config, trajs, files)
    write_report(report, out / "report.json")
    return trajs, report


def summarize_trajectory(traj: Trajectory) -> dict:
    return {
        "run_index": int(traj.run_index),
        "seed": int(traj.seed),
        "records": int(len(traj.t)),
        "final_t": int(traj.t[-1]),
        "final_f": float(traj.f_value[-1]),
        "final_grad_norm": float(traj.grad_norm[-1]),
        "min_grad_norm": float(traj.min_grad_norm[-1]),
        "evals": int(traj.evals[-1]),
        "elapsed_ns": int(traj.elapsed_ns[-1]),
        "terminal_reason": traj.terminal_reason,
    }


def build_report(config: ExperimentConfig, trajs: list[Trajectory],
                 files: list[str]) -> dict:
    return {
        "config": config.canonical(),
        "config_digest": config.digest(),
        "trajectory_files": files,
        "trajectories": [summarize_trajectory(t) for t in trajs],
    }


AGGREGATE_COLUMNS = ("run_index", "seed", "final_t", "final_f",
                     "final_grad_norm", "min_grad_norm", "evals",
                     "elapsed_ns", "terminal_reason")


def write_aggregate_csv(trajs: list[Trajectory], path: str | Path) -> None:
    lines = [",".join(AGGREGATE_COLUMNS)]
    for traj in trajs:
        s = summarize_trajectory(traj)
        lines.append(",".join((
            str(s["run_index"]), str(s["seed"]), str(s["final_t"]),
            _fmt(s["final_f"]), _fmt(s["final_grad_norm"]),
            _fmt(s["min_grad_norm"]), str(s["evals"]), str(s["elapsed_ns"]),
            s["terminal_reason"] or "",
        )))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_report(report: dict, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_report(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"report not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _fmt(x: float) -> str:
    return "%.17g" % x


def write_trajectory_csv(traj: Trajectory, path: str | Path) -> None:
    lines = [",".join(CSV_COLUMNS)]
    for i in range(len(traj.t)):
        a = traj.alpha[i]
        lines.append(",".join((
            str(traj.run_index),
            str(traj.seed),
            str(int(traj.t[i])),
            _fmt(traj.f_value[i]),
            _fmt(traj.grad_norm[i]),
            _fmt(traj.min_grad_norm[i]),
            "" if math.isnan(a) else _fmt(a),
            str(int(traj.evals[i])),
            str(int(traj.elapsed_ns[i])),
        )))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_trajectory_csv(path: str | Path) -> Trajectory:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"trajectory file not found: {path}")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected CSV header {header}")
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    traj = Trajectory(
        t=np.array([int(r[2]) for r in rows], dtype=np.int64),
        f_value=np.array([float(r[3]) for r in rows]),
        grad_norm=np.array([float(r[4]) for r in rows]),
        min_grad_norm=np.array([float(r[5]) for r in rows]),
        alpha=np.array([math.nan if r[6] == "" else float(r[6]) for r in rows]),
        evals=np.array([int(r[7]) for r in rows], dtype=np.int64),
        elapsed_ns=np.array([int(r[8]) for r in rows], dtype=np.int64),
        seed=int(rows[0][1]),
        run_index=int(rows[0][0]),
    )
    traj.validate()
    return traj


def load_trajectories(report: dict, base_dir: str | Path) -> list[Trajectory]:
    """Rehydrate a report's trajectories, reattaching config metadata."""
    base = Path(base_dir)
    config = ExperimentConfig.from_dict(report["config"])
    meta = config.trajectory_meta()
    summaries = {s["run_index"]: s for s in report["trajectories"]}
    trajs = []
    for name in report["trajectory_files"]:
        traj = load_trajectory_csv(base / name)
        traj.meta = dict(meta)
        summary = summaries.get(traj.run_index)
        if summary is not None:
            traj.terminal_reason = summary.get("terminal_reason")
        trajs.append(traj)
    return trajs


def aggregate_reports(paths: list[str | Path]) -> dict:
    """Merge run reports for cross-algorithm comparison plots."""
    if not paths:
        raise ValueError("no reports to aggregate")
    runs = []
    for p in paths:
        p = Path(p)
        report = load_report(p)
        label = report["config"]["solver"]["name"]
        runs.append({"label": label,
                     "base_dir": str(p.parent),
                     "report": report})
    return {"merged": True, "runs": runs}
