"""Experiment harness: configs, run records, aggregation, CLI."""

import os

import numpy as np
import pytest

from dbrl.cli import main
from dbrl.harness import (
    CURVE_HEADER,
    ExperimentConfig,
    RunRecord,
    aggregate_curves,
    evaluate_checkpoint,
    load_run_record,
    make_env,
    read_curve,
    report,
    run_experiment,
    select_sweep_winner,
    sweep,
    write_curve,
)
from dbrl.metrics import MetricReport, SeedMetrics


# ------------------------------------------------------------- configs


def test_resolve_fills_env_defaults():
    cfg = ExperimentConfig(env="pendulum", algo="tla", out="/tmp/x").resolve()
    assert cfg.max_steps == 30_000
    assert cfg.eval_frequency == 250
    assert cfg.warmup_steps == 1_000
    assert (cfg.tau, cfg.p, cfg.j) == (6, 1.0, 1.0)


def test_resolve_keeps_explicit_overrides():
    cfg = ExperimentConfig(env="mountaincar", algo="td3", tau=3, max_steps=500, out="/tmp/x")
    cfg = cfg.resolve()
    assert cfg.tau == 3
    assert cfg.max_steps == 500
    assert cfg.eval_frequency == 2_500  # untouched default


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(env="nowhere", algo="td3"),
        dict(env="pendulum", algo="mystery"),
        dict(env="straight", algo="td3"),  # deep agent on a gridworld
        dict(env="pendulum", algo="qlearn"),  # tabular agent on continuous control
        dict(env="pendulum", algo="tla", tau=1),  # windowed algorithms need tau >= 2
        dict(env="pendulum", algo="td3", seeds=[0, 0]),
        dict(env="pendulum", algo="td3", seeds=[]),
        dict(env="pendulum", algo="td3", decision_limit=0),
    ],
)
def test_config_validation_rejects(kwargs):
    with pytest.raises(ValueError):
        ExperimentConfig(**kwargs).resolve()


def test_config_yaml_roundtrip(tmp_path):
    cfg = ExperimentConfig(
        env="mountaincar", algo="tla", seeds=[3, 1, 4], tau=11, p=0.5, j=2.0,
        decision_limit=200, out=str(tmp_path),
    ).resolve()
    path = tmp_path / "config.yaml"
    cfg.to_yaml(path)
    assert ExperimentConfig.from_yaml(path) == cfg


def test_config_hash_ignores_seeds_out_parallel():
    a = ExperimentConfig(env="pendulum", algo="tla", seeds=[0], out="/a").resolve()
    b = ExperimentConfig(env="pendulum", algo="tla", seeds=[5, 6], out="/b", parallel=4).resolve()
    assert a.config_hash() == b.config_hash()


def test_config_hash_changes_with_substance():
    a = ExperimentConfig(env="pendulum", algo="tla", out="/a").resolve()
    b = ExperimentConfig(env="pendulum", algo="tla", p=2.0, out="/a").resolve()
    assert a.config_hash() != b.config_hash()


def test_make_env_applies_decision_limit():
    cfg = ExperimentConfig(env="mountaincar", algo="td3", decision_limit=200, out="/tmp/x").resolve()
    env = make_env(cfg)
    assert env.decision_limit == 200
    assert env.obs_dim == 2
    grid_cfg = ExperimentConfig(env="straight", algo="qlearn", decision_limit=7, out="/tmp/x").resolve()
    assert make_env(grid_cfg).decision_limit == 7


def test_bounded_mountaincar_env_id():
    cfg = ExperimentConfig(env="mountaincar_db", algo="tla", out="/tmp/x").resolve()
    assert cfg.decision_limit == 200
    assert cfg.tau == 11
    env = make_env(cfg)
    assert env.decision_limit == 200
    # distinct experiment cell from the unbounded task
    plain = ExperimentConfig(env="mountaincar", algo="tla", out="/tmp/x").resolve()
    assert cfg.config_hash() != plain.config_hash()


# --------------------------------------------------------- curve files


def test_curve_csv_roundtrip_is_exact(tmp_path):
    rng = np.random.default_rng(11)
    rows = []
    for k in range(50):
        vals = rng.normal(scale=1e3, size=5)
        rows.append((250 * (k + 1),) + tuple(float(v) for v in vals))
    path = tmp_path / "evalcurve.csv"
    write_curve(path, rows)
    assert read_curve(path) == rows


def test_curve_reader_rejects_foreign_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("step,return\n1,2.0\n")
    with pytest.raises(ValueError):
        read_curve(path)


# ------------------------------------------------------- tabular runs


def _tiny_grid_config(tmp_path, **kwargs):
    base = dict(env="straight", algo="tla_tab", seeds=[0, 1], episodes=60,
                eval_frequency=20, out=str(tmp_path))
    base.update(kwargs)
    return ExperimentConfig(**base)


def test_tabular_run_writes_complete_records(tmp_path):
    records = run_experiment(_tiny_grid_config(tmp_path))
    assert len(records) == 2
    for rec, seed in zip(records, [0, 1]):
        assert rec.seed == seed
        assert [row[0] for row in rec.curve] == [20, 40, 60]
        run_dir = tmp_path / "straight" / "tla_tab" / f"seed{seed}"
        for name in ("config.yaml", "evalcurve.csv", "final.csv", "COMPLETE"):
            assert (run_dir / name).exists()
        assert (run_dir / "traces" / "trace00.csv").exists()
        assert (run_dir / "checkpoint" / "tables.npz").exists()
        loaded = load_run_record(str(run_dir))
        assert loaded.curve == rec.curve
        assert loaded.config_hash == rec.config_hash


def test_same_seed_reruns_are_identical(tmp_path):
    rec_a = run_experiment(_tiny_grid_config(tmp_path / "a"))[0]
    rec_b = run_experiment(_tiny_grid_config(tmp_path / "b"))[0]
    assert rec_a.curve == rec_b.curve
    assert rec_a.final.rows[0] == rec_b.final.rows[0]


def test_finished_seed_is_not_retrained(tmp_path):
    cfg = _tiny_grid_config(tmp_path, seeds=[0])
    run_experiment(cfg)
    marker = tmp_path / "straight" / "tla_tab" / "seed0" / "evalcurve.csv"
    before = marker.stat().st_mtime_ns
    run_experiment(cfg)
    assert marker.stat().st_mtime_ns == before


def test_conflicting_finished_run_is_rejected(tmp_path):
    run_experiment(_tiny_grid_config(tmp_path, seeds=[0]))
    changed = _tiny_grid_config(tmp_path, seeds=[0], p=3.5)
    with pytest.raises(ValueError, match="different config"):
        run_experiment(changed)


def test_checkpoint_reevaluation_matches_recorded_final(tmp_path):
    cfg = _tiny_grid_config(tmp_path, seeds=[0])
    rec = run_experiment(cfg)[0]
    rep = evaluate_checkpoint(str(tmp_path / "straight" / "tla_tab" / "seed0"))
    # deterministic gridworld, greedy policy: identical return and decisions
    assert rep.rows[0].avg_return == rec.final.rows[0].avg_return
    assert rep.rows[0].avg_decisions == rec.final.rows[0].avg_decisions


# ---------------------------------------------------------- deep runs


def test_deep_run_eval_points_and_resume(tmp_path):
    cfg = ExperimentConfig(
        env="pendulum", algo="td3", seeds=[0], max_steps=600,
        eval_frequency=250, warmup_steps=100, eval_episodes=2, out=str(tmp_path),
    )
    rec = run_experiment(cfg)[0]
    # 250, 500 on the grid, then the final point at max_steps
    assert [row[0] for row in rec.curve] == [250, 500, 600]
    run_dir = tmp_path / "pendulum" / "td3" / "seed0"
    assert (run_dir / "checkpoint" / "actor.npz").exists()
    # one actor read per step, 200-step episodes
    assert rec.final.rows[0].avg_decisions == 200.0
    assert rec.final.rows[0].avg_mmacs == pytest.approx(200 * 66_560 / 1e6)

    before = (run_dir / "evalcurve.csv").stat().st_mtime_ns
    again = run_experiment(cfg)[0]
    assert (run_dir / "evalcurve.csv").stat().st_mtime_ns == before
    assert again.curve == rec.curve


def test_deep_run_respects_decision_limit(tmp_path):
    cfg = ExperimentConfig(
        env="mountaincar", algo="td3", seeds=[0], decision_limit=50,
        max_steps=300, eval_frequency=300, warmup_steps=50, eval_episodes=2,
        out=str(tmp_path),
    )
    rec = run_experiment(cfg)[0]
    assert rec.final.rows[0].avg_decisions <= 50


# --------------------------------------------------------- aggregation


def _fake_record(h, seed, returns, decisions=None):
    decisions = decisions if decisions is not None else [10.0] * len(returns)
    curve = [
        (250 * (i + 1), float(r), float(d), 1.0, 0.5, 80.0)
        for i, (r, d) in enumerate(zip(returns, decisions))
    ]
    row = SeedMetrics(seed, float(returns[-1]), float(decisions[-1]), 1.0, 80.0, 0.5, 0.9)
    return RunRecord(h, seed, curve, MetricReport("pendulum", "tla", [row]))


def test_aggregate_curves_mean_and_stderr():
    recs = [_fake_record("h", 0, [0.0, 2.0]), _fake_record("h", 1, [4.0, 6.0])]
    steps, agg = aggregate_curves(recs)
    assert list(steps) == [250, 500]
    mean, err = agg["avg_return"]
    assert mean == pytest.approx([2.0, 4.0])
    assert err == pytest.approx([2.0 / np.sqrt(2)] * 2)


def test_aggregate_curves_is_order_independent():
    recs = [_fake_record("h", s, list(np.random.default_rng(s).normal(size=4))) for s in range(5)]
    steps_a, agg_a = aggregate_curves(recs)
    steps_b, agg_b = aggregate_curves(recs[::-1])
    assert np.array_equal(steps_a, steps_b)
    for name in agg_a:
        assert np.allclose(agg_a[name][0], agg_b[name][0])
        assert np.allclose(agg_a[name][1], agg_b[name][1])


def test_aggregate_curves_rejects_mixed_configs():
    recs = [_fake_record("ha", 0, [1.0]), _fake_record("hb", 1, [1.0])]
    with pytest.raises(ValueError, match="mix"):
        aggregate_curves(recs)


def test_aggregate_curves_rejects_mismatched_grids():
    recs = [_fake_record("h", 0, [1.0, 2.0]), _fake_record("h", 1, [1.0])]
    with pytest.raises(ValueError):
        aggregate_curves(recs)


def test_report_writes_svg_and_summary(tmp_path):
    run_experiment(_tiny_grid_config(tmp_path, seeds=[0, 1]))
    out_dirs = report(str(tmp_path))
    assert len(out_dirs) == 1
    svg = os.path.join(out_dirs[0], "straight.svg")
    assert os.path.exists(svg)
    with open(svg) as fh:
        assert "<svg" in fh.read(2000)
    with open(os.path.join(out_dirs[0], "summary.csv")) as fh:
        header = fh.readline().strip()
    assert header.startswith("env,algo,avg_return")


# -------------------------------------------------------------- sweeps


def test_sweep_winner_prefers_fewer_decisions_within_one_std():
    rows = [
        dict(tau=2, p=1.0, mean_return=-30.0, std_return=5.0, mean_decisions=120.0),
        dict(tau=6, p=1.0, mean_return=-33.0, std_return=4.0, mean_decisions=60.0),
        dict(tau=11, p=1.0, mean_return=-80.0, std_return=4.0, mean_decisions=20.0),
    ]
    # -33 is within one std (5) of the best (-30); -80 is not
    assert select_sweep_winner(rows)["tau"] == 6


def test_sweep_winner_respects_clear_return_gaps():
    rows = [
        dict(tau=2, p=1.0, mean_return=-30.0, std_return=1.0, mean_decisions=120.0),
        dict(tau=6, p=1.0, mean_return=-60.0, std_return=1.0, mean_decisions=10.0),
    ]
    assert select_sweep_winner(rows)["tau"] == 2


def test_sweep_runs_cells_and_writes_table(tmp_path):
    base = ExperimentConfig(env="straight", algo="tla_tab", episodes=40,
                            eval_frequency=20, out=str(tmp_path))
    (tau, p), rows = sweep(base, taus=[2, 4], ps=[1.0], n_seeds=2)
    assert len(rows) == 4 or len(rows) == 2  # 2 taus x 1 p
    assert sum(r["selected"] for r in rows) == 1
    assert (tau, p) == next((r["tau"], r["p"]) for r in rows if r["selected"])
    table = tmp_path / "sweep" / "straight_tla_tab" / "sweep.csv"
    assert table.exists()
    assert table.read_text().startswith("tau,p,mean_return")


# ----------------------------------------------------------------- CLI


def test_cli_train_plot_and_oracle(tmp_path, capsys):
    rc = main([
        "train", "--env", "straight", "--algo", "tla_tab", "--seeds", "0", "1",
        "--episodes", "60", "--eval-frequency", "20", "--out", str(tmp_path),
    ])
    assert rc == 0
    assert "2 seed(s) complete" in capsys.readouterr().out

    rc = main(["plot", "--env", "straight", "--out", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "env,algo,avg_return" in out
    assert os.path.exists(tmp_path / "reports" / "straight" / "straight.svg")

    rc = main(["eval", "--run", str(tmp_path / "straight" / "tla_tab" / "seed0")])
    assert rc == 0
    assert "straight,tla_tab" in capsys.readouterr().out

    rc = main(["oracle", "--env", "slalom"])
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "macros,optimal_return,min_decisions,goal_reachable"
    table = {ln.split(",")[0]: ln.split(",")[1:] for ln in lines[1:]}
    assert float(table["one-step"][0]) == -15.0
    assert float(table["repeat-4"][0]) < -15.0  # pure repetition cannot take the turn cleanly
    assert float(table["union-4"][0]) == -15.0


def test_cli_single_seed_flag(tmp_path):
    rc = main([
        "train", "--env", "straight", "--algo", "qlearn", "--seed", "7",
        "--episodes", "20", "--eval-frequency", "20", "--out", str(tmp_path),
    ])
    assert rc == 0
    assert (tmp_path / "straight" / "qlearn" / "seed7" / "COMPLETE").exists()


def test_cli_rejects_bad_combo(tmp_path):
    with pytest.raises(ValueError):
        main(["train", "--env", "pendulum", "--algo", "qlearn", "--out", str(tmp_path)])
