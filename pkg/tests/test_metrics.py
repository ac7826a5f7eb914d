"""Metric definitions, worked examples, and CSV-recompute exactness."""

import numpy as np
import pytest

from dbrl.core import EpisodeTrace
from dbrl.metrics import (
    MetricReport,
    SeedMetrics,
    action_repetition,
    episode_mmacs,
    jerk,
    normalized_auc,
    seed_metrics,
    summary_table,
    trace_is_degenerate,
)


def _trace_from_actions(actions, macs_per_step=0):
    tr = EpisodeTrace()
    for a in actions:
        tr.append_step(a, -1.0, decision=True, macs=macs_per_step)
    return tr


# ---------------------------------------------------------------------------
# repetition


def test_repetition_worked_example():
    tr = _trace_from_actions([1, 1, 2, 2, 2])
    assert action_repetition(tr) == pytest.approx(75.0)


def test_repetition_all_distinct_continuous_is_zero():
    rng = np.random.default_rng(0)
    tr = _trace_from_actions(list(rng.normal(size=50)))
    assert action_repetition(tr) == 0.0


def test_repetition_per_dimension_average():
    # dim 1 always repeats, dim 2 never repeats -> 50%
    actions = [np.array([0.7, float(i)]) for i in range(10)]
    tr = _trace_from_actions(actions)
    assert action_repetition(tr) == pytest.approx(50.0)


def test_repetition_bounds_on_random_traces():
    rng = np.random.default_rng(1)
    for _ in range(50):
        n = int(rng.integers(2, 30))
        vals = rng.choice([0.25, -0.5, 1.0], size=n)
        tr = _trace_from_actions(list(vals))
        assert 0.0 <= action_repetition(tr) <= 100.0


def test_repetition_degenerate_trace():
    tr = _trace_from_actions([3])
    assert trace_is_degenerate(tr)
    assert action_repetition(tr) == 0.0


# ---------------------------------------------------------------------------
# jerk


def test_jerk_constant_action_is_zero():
    tr = _trace_from_actions([0.3] * 8)
    assert jerk(tr) == 0.0


def test_jerk_worked_example():
    tr = _trace_from_actions([0.5, -0.5, -0.5])
    assert jerk(tr) == pytest.approx(0.5)


def test_jerk_commitment_inserts_zeros():
    rng = np.random.default_rng(2)
    base = list(rng.uniform(-1, 1, size=10))
    held = [a for a in base for _ in range(4)]  # each action held 4 steps
    per_step = _trace_from_actions(base)
    committed = _trace_from_actions(held)
    assert jerk(committed) <= jerk(per_step)
    # exact relation: same total variation spread over more steps
    expected = np.sum(np.abs(np.diff(base))) / (len(held) - 1)
    assert jerk(committed) == pytest.approx(expected)


def test_jerk_degenerate_trace():
    assert jerk(_trace_from_actions([1.0])) == 0.0


# ---------------------------------------------------------------------------
# MACs


def test_episode_mmacs_production_shape():
    # 200 steps of one forward through a 3-256-256-1 network
    tr = _trace_from_actions([0.0] * 200, macs_per_step=66_560)
    assert episode_mmacs(tr) == pytest.approx(13.312)


def test_episode_mmacs_zero_steps():
    assert episode_mmacs(EpisodeTrace()) == 0.0


def test_episode_mmacs_additive_over_segments():
    rng = np.random.default_rng(3)
    charges = list(rng.integers(0, 70000, size=20))
    tr, first, second = EpisodeTrace(), EpisodeTrace(), EpisodeTrace()
    for m in charges:
        tr.append_step(0, -1.0, decision=True, macs=int(m))
    for m in charges[:7]:
        first.append_step(0, -1.0, decision=True, macs=int(m))
    for m in charges[7:]:
        second.append_step(0, -1.0, decision=True, macs=int(m))
    assert episode_mmacs(tr) == pytest.approx(episode_mmacs(first) + episode_mmacs(second))


# ---------------------------------------------------------------------------
# AUC


def test_auc_constant_extremes():
    assert normalized_auc([0.0] * 5, -2000.0, 0.0) == 1.0
    assert normalized_auc([-2000.0] * 5, -2000.0, 0.0) == 0.0


def test_auc_clips_out_of_range():
    assert normalized_auc([150.0, -150.0], -100.0, 100.0) == pytest.approx(0.5)


def test_auc_monotone_in_pointwise_dominance():
    rng = np.random.default_rng(4)
    for _ in range(25):
        lo = rng.uniform(-100, 100, size=12)
        hi = lo + rng.uniform(0, 20, size=12)
        assert normalized_auc(hi, -100, 100) >= normalized_auc(lo, -100, 100)


def test_auc_rejects_bad_bounds():
    with pytest.raises(ValueError):
        normalized_auc([0.0], 1.0, -1.0)
    with pytest.raises(ValueError):
        normalized_auc([], -1.0, 1.0)


# ---------------------------------------------------------------------------
# report plumbing


def _example_report():
    rng = np.random.default_rng(5)
    rows = []
    for seed in range(3):
        traces = [_trace_from_actions(list(rng.uniform(-1, 1, size=10)), macs_per_step=100) for _ in range(4)]
        curve = rng.uniform(-2000, 0, size=6)
        rows.append(seed_metrics(seed, traces, curve, (-2000.0, 0.0)))
    return MetricReport(env="pendulum", algo="tla", rows=rows)


def test_metrics_recompute_from_trace_csv_is_exact():
    rng = np.random.default_rng(6)
    tr = _trace_from_actions(list(rng.uniform(-2, 2, size=30)), macs_per_step=66_560)
    back = EpisodeTrace.from_csv_string(tr.to_csv_string())
    assert action_repetition(back) == action_repetition(tr)
    assert jerk(back) == jerk(tr)
    assert episode_mmacs(back) == episode_mmacs(tr)


def test_report_csv_roundtrip():
    rep = _example_report()
    back = MetricReport.from_csv_string(rep.to_csv_string())
    assert back.env == rep.env and back.algo == rep.algo
    for a, b in zip(back.rows, rep.rows):
        assert a == b
    assert back.avg_return == rep.avg_return
    assert back.normalized_auc == rep.normalized_auc


def test_report_csv_file_roundtrip(tmp_path):
    rep = _example_report()
    path = tmp_path / "metrics.csv"
    rep.to_csv(path)
    back = MetricReport.from_csv(path)
    assert back == rep


def test_report_rejects_bad_header():
    with pytest.raises(ValueError):
        MetricReport.from_csv_string("a,b,c\n1,2,3\n")


def test_summary_table_has_one_row_per_report():
    rep = _example_report()
    text = summary_table([rep, rep])
    lines = text.strip().splitlines()
    assert len(lines) == 3
    assert lines[0].startswith("env,algo,avg_return")
    assert lines[1].startswith("pendulum,tla,")


def test_seed_metrics_requires_traces():
    with pytest.raises(ValueError):
        seed_metrics(0, [], [0.0], (-1.0, 1.0))


def test_seed_metrics_counts_degenerate_episodes():
    traces = [_trace_from_actions([1.0]), _trace_from_actions([1.0, 2.0])]
    sm = seed_metrics(0, traces, [0.0], (-1.0, 1.0))
    assert sm.degenerate_episodes == 1
