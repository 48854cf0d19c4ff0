import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from stpbench.checks import run_checks
from stpbench.cli import main as cli_main
from stpbench.errors import ConfigError, EmptyPlotError
from stpbench.experiment import (
    CSV_COLUMNS,
    ExperimentConfig,
    aggregate_reports,
    load_report,
    load_trajectories,
    load_trajectory_csv,
    run_experiment,
    write_report,
)


def base_config(out_dir, **overrides):
    raw = {
        "objective": {"name": "sphere_quadratic", "dim": 5},
        "solver": {"name": "stp"},
        "schedule": {"name": "power", "alpha": 1.0, "exponent": 0.6},
        "distribution": {"name": "unit_sphere"},
        "theta_init": {"kind": "fill", "value": 1.0},
        "trajectories": 3,
        "iterations": 60,
        "base_seed": 11,
        "record_every": 10,
        "output_dir": str(out_dir),
    }
    raw.update(overrides)
    return raw


def strip_elapsed(csv_text: str) -> str:
    lines = csv_text.strip().splitlines()
    return "\n".join(",".join(line.split(",")[:-1]) for line in lines)


# --- config ------------------------------------------------------------------

def test_config_round_trip_and_digest(tmp_path):
    raw = base_config(tmp_path / "out")
    cfg = ExperimentConfig.from_dict(raw)
    again = ExperimentConfig.from_dict(cfg.canonical())
    assert cfg.canonical() == again.canonical()
    assert cfg.digest() == again.digest()
    assert len(cfg.digest()) == 64
    # digest is sensitive to parameter changes
    other = ExperimentConfig.from_dict(base_config(tmp_path / "out", base_seed=12))
    assert other.digest() != cfg.digest()


def test_config_errors_name_offending_key(tmp_path):
    with pytest.raises(ConfigError, match="objective.name"):
        ExperimentConfig.from_dict(
            base_config(tmp_path, objective={"name": "ackley", "dim": 3}))
    with pytest.raises(ConfigError, match="solver.name"):
        ExperimentConfig.from_dict(base_config(tmp_path, solver={"name": "cma"}))
    with pytest.raises(ConfigError, match="schedule"):
        cfg = base_config(tmp_path)
        del cfg["schedule"]
        ExperimentConfig.from_dict(cfg)
    with pytest.raises(ConfigError, match="trajectories"):
        ExperimentConfig.from_dict(base_config(tmp_path, trajectories=0))
    with pytest.raises(ConfigError, match="theta_init"):
        ExperimentConfig.from_dict(
            base_config(tmp_path, theta_init={"kind": "coords", "values": [1.0]}))


def test_directional_default_h_needs_strong_convexity(tmp_path):
    raw = base_config(tmp_path, objective={"name": "nesterov_chain", "dim": 5},
                      schedule={"name": "directional"})
    with pytest.raises(ConfigError, match="schedule.h"):
        ExperimentConfig.from_dict(raw)
    # explicit h is fine on a merely smooth objective
    raw["schedule"] = {"name": "directional", "h": 1.5}
    ExperimentConfig.from_dict(raw)


def test_schedule_only_for_stp(tmp_path):
    raw = base_config(tmp_path, solver={"name": "rgf", "mu_fd": 1e-4, "h_step": 0.25})
    with pytest.raises(ConfigError, match="schedule"):
        ExperimentConfig.from_dict(raw)
    del raw["schedule"]
    cfg = ExperimentConfig.from_dict(raw)
    assert cfg.schedule is None


# --- run / files -------------------------------------------------------------

def test_run_writes_expected_files(tmp_path):
    cfg = ExperimentConfig.from_dict(base_config(tmp_path / "out"))
    trajs, report = run_experiment(cfg)
    out = tmp_path / "out"
    assert (out / "report.json").exists()
    assert (out / "aggregate.csv").exists()
    names = sorted(p.name for p in out.glob("trajectory_*.csv"))
    assert names == ["trajectory_0000.csv", "trajectory_0001.csv",
                     "trajectory_0002.csv"]
    assert report["config_digest"] == cfg.digest()
    assert len(report["trajectories"]) == 3


def test_csv_round_trip(tmp_path):
    cfg = ExperimentConfig.from_dict(base_config(tmp_path / "out"))
    trajs, report = run_experiment(cfg)
    loaded = load_trajectory_csv(tmp_path / "out" / "trajectory_0001.csv")
    orig = trajs[1]
    assert np.array_equal(loaded.t, orig.t)
    assert np.array_equal(loaded.f_value, orig.f_value)
    assert np.array_equal(loaded.grad_norm, orig.grad_norm)
    assert np.array_equal(loaded.min_grad_norm, orig.min_grad_norm)
    assert np.array_equal(np.isnan(loaded.alpha), np.isnan(orig.alpha))
    mask = ~np.isnan(orig.alpha)
    assert np.array_equal(loaded.alpha[mask], orig.alpha[mask])
    assert np.array_equal(loaded.evals, orig.evals)
    assert loaded.seed == orig.seed and loaded.run_index == 1
    loaded.validate()


def test_csv_header_and_alpha_blanks(tmp_path):
    cfg = ExperimentConfig.from_dict(base_config(tmp_path / "out"))
    run_experiment(cfg)
    text = (tmp_path / "out" / "trajectory_0000.csv").read_text()
    lines = text.strip().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert lines[-1].split(",")[6] == ""  # final row has no step size


def test_rerun_byte_identical_modulo_elapsed(tmp_path):
    cfg_a = ExperimentConfig.from_dict(base_config(tmp_path / "a"))
    cfg_b = ExperimentConfig.from_dict(base_config(tmp_path / "b"))
    run_experiment(cfg_a)
    run_experiment(cfg_b)
    for i in range(3):
        a = (tmp_path / "a" / f"trajectory_{i:04d}.csv").read_text()
        b = (tmp_path / "b" / f"trajectory_{i:04d}.csv").read_text()
        assert strip_elapsed(a) == strip_elapsed(b)


def test_threads_do_not_change_results(tmp_path):
    cfg_a = ExperimentConfig.from_dict(base_config(tmp_path / "a"))
    cfg_b = ExperimentConfig.from_dict(base_config(tmp_path / "b"))
    run_experiment(cfg_a, threads=1)
    run_experiment(cfg_b, threads=3)
    for i in range(3):
        a = (tmp_path / "a" / f"trajectory_{i:04d}.csv").read_text()
        b = (tmp_path / "b" / f"trajectory_{i:04d}.csv").read_text()
        assert strip_elapsed(a) == strip_elapsed(b)


def test_output_dir_env_override(tmp_path, monkeypatch):
    target = tmp_path / "redirected"
    monkeypatch.setenv("STPBENCH_OUTPUT_DIR", str(target))
    cfg = ExperimentConfig.from_dict(base_config(tmp_path / "ignored"))
    run_experiment(cfg)
    assert (target / "report.json").exists()
    assert not (tmp_path / "ignored").exists()


def test_first_row_identities_chain(tmp_path):
    raw = base_config(tmp_path / "out",
                      objective={"name": "nesterov_chain", "dim": 500},
                      theta_init={"kind": "zeros"}, trajectories=1, iterations=1,
                      schedule={"name": "power", "alpha": 4.0, "exponent": 0.51})
    cfg = ExperimentConfig.from_dict(raw)
    run_experiment(cfg)
    traj = load_trajectory_csv(tmp_path / "out" / "trajectory_0000.csv")
    assert traj.t[0] == 1
    assert traj.f_value[0] == 0.0
    assert traj.grad_norm[0] == 1.0


def test_report_regenerates_bit_identical_from_csvs(tmp_path):
    from stpbench.experiment import build_report

    cfg = ExperimentConfig.from_dict(base_config(tmp_path / "out"))
    run_experiment(cfg)
    stored = (tmp_path / "out" / "report.json").read_text()
    report = load_report(tmp_path / "out" / "report.json")
    trajs = load_trajectories(report, tmp_path / "out")
    rebuilt = build_report(cfg, trajs, report["trajectory_files"])
    assert json.dumps(rebuilt, sort_keys=True, indent=2) + "\n" == stored


def test_load_trajectories_attaches_meta(tmp_path):
    cfg = ExperimentConfig.from_dict(base_config(tmp_path / "out"))
    run_experiment(cfg)
    report = load_report(tmp_path / "out" / "report.json")
    trajs = load_trajectories(report, tmp_path / "out")
    assert len(trajs) == 3
    assert trajs[0].meta["f_star"] == 0.0
    assert trajs[0].meta["objective"] == "sphere_quadratic"


def test_missing_files_reported_with_path(tmp_path):
    with pytest.raises(FileNotFoundError, match="report"):
        load_report(tmp_path / "nope" / "report.json")
    with pytest.raises(FileNotFoundError, match="trajectory"):
        load_trajectory_csv(tmp_path / "missing.csv")


# --- checks ------------------------------------------------------------------

def test_checks_pass_on_clean_run(tmp_path):
    cfg = ExperimentConfig.from_dict(base_config(tmp_path / "out"))
    trajs, _ = run_experiment(cfg)
    verdict = run_checks(cfg, trajs)
    assert verdict["all_pass"]
    names = [c["check_name"] for c in verdict["checks"]]
    assert "trajectory_invariants" in names
    assert "monotone_f" in names
    assert "lemma1_monte_carlo" in names


def test_check_negative_control_injected_increase(tmp_path):
    cfg = ExperimentConfig.from_dict(base_config(tmp_path / "out"))
    run_experiment(cfg)
    path = tmp_path / "out" / "trajectory_0000.csv"
    lines = path.read_text().strip().splitlines()
    parts = lines[-1].split(",")
    parts[3] = "1000.0"  # force an f increase on the final record
    lines[-1] = ",".join(parts)
    path.write_text("\n".join(lines) + "\n")

    report = load_report(tmp_path / "out" / "report.json")
    trajs = load_trajectories(report, tmp_path / "out")
    verdict = run_checks(cfg, trajs)
    assert not verdict["all_pass"]
    failing = {c["check_name"] for c in verdict["checks"] if not c["pass"]}
    assert "monotone_f" in failing


def test_checks_directional_strongly_convex(tmp_path):
    raw = base_config(tmp_path / "out",
                      objective={"name": "sphere_quadratic", "dim": 10},
                      schedule={"name": "directional"},
                      trajectories=4, iterations=200, record_every=1,
                      base_seed=13)
    cfg = ExperimentConfig.from_dict(raw)
    trajs, _ = run_experiment(cfg)
    verdict = run_checks(cfg, trajs)
    names = [c["check_name"] for c in verdict["checks"]]
    assert "lemma5_replay" in names
    assert "geometric_rate" in names
    assert "per_seed_geometric" in names
    assert verdict["all_pass"], json.dumps(verdict, indent=2)


# --- CLI ---------------------------------------------------------------------

def write_config_file(tmp_path, raw):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(raw))
    return path

def test_cli_run_check_plot_aggregate(tmp_path, capsys):
    raw = base_config(tmp_path / "out")
    cfg_path = write_config_file(tmp_path, raw)
    assert cli_main(["run", "--config", str(cfg_path), "--threads", "2"]) == 0
    assert cli_main(["check", "--config", str(cfg_path)]) == 0
    out = capsys.readouterr().out
    assert '"all_pass": true' in out

    fig = tmp_path / "fig.svg"
    assert cli_main(["plot", "--report", str(tmp_path / "out" / "report.json"),
                     "--kind", "grad_vs_iter", "--out", str(fig)]) == 0
    root = ET.parse(fig).getroot()
    assert root.tag.endswith("svg")

    merged = tmp_path / "merged.json"
    assert cli_main(["aggregate", "--report", str(tmp_path / "out" / "report.json"),
                     "--report", str(tmp_path / "out" / "report.json"),
                     "--out", str(merged)]) == 0
    fig2 = tmp_path / "fig2.svg"
    assert cli_main(["plot", "--report", str(merged), "--kind", "rate_curve",
                     "--out", str(fig2)]) == 0
    assert fig2.exists()


def test_cli_check_nonzero_exit_on_failure(tmp_path, capsys):
    raw = base_config(tmp_path / "out")
    cfg_path = write_config_file(tmp_path, raw)
    cli_main(["run", "--config", str(cfg_path)])
    path = tmp_path / "out" / "trajectory_0001.csv"
    lines = path.read_text().strip().splitlines()
    parts = lines[-1].split(",")
    parts[3] = "999.0"
    lines[-1] = ",".join(parts)
    path.write_text("\n".join(lines) + "\n")
    assert cli_main(["check", "--config", str(cfg_path)]) == 1


def test_cli_constants(tmp_path, capsys):
    raw = base_config(tmp_path / "out",
                      schedule={"name": "harmonic", "alpha": 50.0})
    cfg_path = write_config_file(tmp_path, raw)
    assert cli_main(["constants", "--config", str(cfg_path)]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["mu_d"] == pytest.approx(1.0 / math.sqrt(2.0 * math.pi * 5.0))
    assert info["gamma_d"] == 1.0
    assert info["thm7_h"] == pytest.approx(
        2.0 / math.sqrt(1.0 - 1.0 / (10.0 * math.pi)))
    assert info["sublevel_radius"] == pytest.approx(math.sqrt(5.0), rel=1e-12)
    assert "thm4_a" in info


def test_cli_unknown_flag_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        cli_main(["run", "--config", "x.json", "--frobnicate"])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_cli_missing_config_file(tmp_path, capsys):
    assert cli_main(["run", "--config", str(tmp_path / "nope.json")]) == 2
    assert "error" in capsys.readouterr().err


def test_cli_check_from_report_path(tmp_path, capsys):
    raw = base_config(tmp_path / "out")
    cfg_path = write_config_file(tmp_path, raw)
    cli_main(["run", "--config", str(cfg_path)])
    out_file = tmp_path / "verdict.json"
    assert cli_main(["check", "--report", str(tmp_path / "out" / "report.json"),
                     "--out", str(out_file)]) == 0
    saved = json.loads(out_file.read_text())
    assert saved["all_pass"] is True


# --- plots -------------------------------------------------------------------

def test_plot_line_per_trajectory_and_labels(tmp_path):
    from stpbench.plots import plot_report

    cfg = ExperimentConfig.from_dict(base_config(tmp_path / "out"))
    run_experiment(cfg)
    report = load_report(tmp_path / "out" / "report.json")
    out = plot_report(report, tmp_path / "out", "grad_vs_iter", tmp_path / "g.svg")
    text = out.read_text()
    assert text.count('<g id="line2d_') >= 3  # one polyline per trajectory
    assert "iteration" in text and "gradient norm" in text


def test_plot_constant_series_padding(tmp_path):
    from stpbench.plots import plot_trajectories
    from stpbench.solvers import Trajectory

    n = 20
    traj = Trajectory(
        t=np.arange(1, n + 1, dtype=np.int64), f_value=np.full(n, 2.0),
        grad_norm=np.full(n, 3.0), min_grad_norm=np.full(n, 3.0),
        alpha=np.full(n, np.nan), evals=np.arange(1, n + 1, dtype=np.int64),
        elapsed_ns=np.arange(n, dtype=np.int64), seed=0,
    )
    out = plot_trajectories([("x", [traj])], "grad_vs_iter", tmp_path / "c.svg")
    assert out.exists()


def test_plot_empty_report_rejected(tmp_path):
    from stpbench.plots import plot_trajectories

    with pytest.raises(EmptyPlotError):
        plot_trajectories([], "grad_vs_iter", tmp_path / "e.svg")


def test_plot_fgap_requires_fstar(tmp_path):
    from stpbench.plots import plot_report

    raw = base_config(tmp_path / "out", objective={"name": "nesterov_chain", "dim": 5},
                      theta_init={"kind": "zeros"},
                      schedule={"name": "power", "alpha": 4.0, "exponent": 0.51})
    cfg = ExperimentConfig.from_dict(raw)
    run_experiment(cfg)
    report = load_report(tmp_path / "out" / "report.json")
    with pytest.raises(EmptyPlotError, match="optimum"):
        plot_report(report, tmp_path / "out", "fgap_vs_iter", tmp_path / "f.svg")


# --- aggregate ---------------------------------------------------------------

def test_aggregate_reports_merges_labels(tmp_path):
    raw_a = base_config(tmp_path / "a")
    raw_b = base_config(tmp_path / "b",
                        solver={"name": "gld", "r_min": 1e-5, "r_max": 1e-4})
    del raw_b["schedule"]
    run_experiment(ExperimentConfig.from_dict(raw_a))
    run_experiment(ExperimentConfig.from_dict(raw_b))
    merged = aggregate_reports([tmp_path / "a" / "report.json",
                                tmp_path / "b" / "report.json"])
    assert merged["merged"] is True
    assert [r["label"] for r in merged["runs"]] == ["stp", "gld"]
    write_report(merged, tmp_path / "merged.json")
    assert json.loads((tmp_path / "merged.json").read_text())["merged"] is True
