# ==============================================================================
# test_mixing_schedule.py  –  Tests for the mixing-weight schedule p(t)
# ==============================================================================

from dataclasses import replace

import numpy as np
import pytest

from singshift.schedule.mixing_schedule import (
    JT_FT,
    JT_SCRATCH,
    MIXED,
    TWO_STAGE,
    ScheduleConfig,
    ScheduleError,
    classify_schedule,
    evaluate_schedule,
    jt_ft,
    jt_scratch,
    linear,
    logistic,
    schedule_curve,
    two_stage,
)


# ------------------------------------------------------------------------------
# evaluate_schedule
# ------------------------------------------------------------------------------
@pytest.mark.parametrize("t", [0, 10, 99])
def test_two_stage_is_zero_everywhere(t):
    assert evaluate_schedule(two_stage(100), t).p == 0.0


def test_linear_midpoint():
    assert evaluate_schedule(linear(1.0, 0, 100, 100), 50).p == pytest.approx(0.5)


def test_logistic_midpoint_is_symmetric():
    assert evaluate_schedule(logistic(1.0, 10.0, 0, 100, 100), 50).p == pytest.approx(0.5, abs=1e-12)


def test_step_switches_exactly_at_t_start():
    cfg = jt_ft(125, 500)
    assert evaluate_schedule(cfg, 124).p == 0.0
    assert evaluate_schedule(cfg, 125).p == 1.0


def test_jt_scratch_is_one_from_epoch_zero():
    cfg = jt_scratch(10)
    assert [evaluate_schedule(cfg, t).p for t in range(10)] == [1.0] * 10


def test_weight_reaches_k_after_t_end():
    cfg = linear(0.4, 2, 6, 10)
    assert evaluate_schedule(cfg, 1).p == 0.0
    assert evaluate_schedule(cfg, 6).p == pytest.approx(0.4)
    assert evaluate_schedule(cfg, 9).p == pytest.approx(0.4)


@pytest.mark.parametrize(
    "cfg",
    [linear(0.7, 3, 17, 20), logistic(1.0, 4.0, 0, 20, 20), logistic(0.5, 25.0, 5, 10, 20)],
)
def test_ramps_are_monotone_and_bounded(cfg):
    values = [evaluate_schedule(cfg, t).p for t in range(cfg.T_max)]
    assert all(0.0 <= v <= cfg.K for v in values)
    assert all(b >= a for a, b in zip(values, values[1:]))


def _random_schedules(n, seed=0):
    rng = np.random.default_rng(seed)
    configs = []
    for _ in range(n):
        t_max = int(rng.integers(1, 60))
        t_start = int(rng.integers(0, t_max + 1))
        t_end = int(rng.integers(t_start, t_max + 1))
        k = float(rng.choice([0.0, 1.0, rng.uniform(0.0, 1.0)]))
        pattern = rng.choice(["linear", "logistic", "step"])
        if pattern == "step":
            t_end = t_start
        configs.append(ScheduleConfig(str(pattern), k, float(rng.uniform(0.1, 30.0)), t_start, t_end, t_max))
    return configs


def test_random_schedules_hold_their_properties():
    for cfg in _random_schedules(200):
        values = [evaluate_schedule(cfg, t).p for t in range(cfg.T_max)]
        assert all(0.0 <= v <= cfg.K for v in values), cfg
        assert all(b >= a for a, b in zip(values, values[1:])), cfg
        assert all(values[t] == 0.0 for t in range(min(cfg.T_start, cfg.T_max))), cfg
        assert all(values[t] == cfg.K for t in range(cfg.T_end, cfg.T_max)), cfg


def test_evaluate_records_epoch():
    assert evaluate_schedule(jt_ft(2, 4), 3).epoch == 3


@pytest.mark.parametrize("t", [-1, 4, 10])
def test_epoch_outside_range_is_rejected(t):
    with pytest.raises(ScheduleError):
        evaluate_schedule(jt_ft(2, 4), t)


def test_fractional_epoch_is_rejected():
    with pytest.raises(ScheduleError):
        evaluate_schedule(jt_ft(2, 4), 1.5)


# ------------------------------------------------------------------------------
# Validation
# ------------------------------------------------------------------------------
@pytest.mark.parametrize(
    "kwargs",
    [
        {"pattern": "sawtooth"},
        {"K": 1.5},
        {"K": -0.1},
        {"T_max": 0},
        {"pattern": "linear", "T_start": 10, "T_end": 5},
        {"pattern": "linear", "T_start": 0, "T_end": 70},
        {"pattern": "step", "T_start": 5, "T_end": 6},
        {"pattern": "two_stage", "K": 0.5},
        {"pattern": "logistic", "r": 0.0, "T_start": 0, "T_end": 10},
    ],
)
def test_invalid_configurations_raise(kwargs):
    with pytest.raises(ScheduleError):
        ScheduleConfig(**kwargs)


# ------------------------------------------------------------------------------
# classify_schedule
# ------------------------------------------------------------------------------
@pytest.mark.parametrize(
    "cfg, expected",
    [
        (two_stage(500), TWO_STAGE),
        (linear(0.0, 0, 100, 500), TWO_STAGE),
        (jt_ft(0, 500), JT_SCRATCH),
        (jt_scratch(500), JT_SCRATCH),
        (jt_ft(125, 500), JT_FT),
        (jt_ft(500, 500), TWO_STAGE),
        (linear(1.0, 0, 500, 500), MIXED),
        (logistic(1.0, 10.0, 0, 500, 500), MIXED),
        (ScheduleConfig("step", 0.5, 10.0, 100, 100, 500), MIXED),
    ],
)
def test_classify(cfg, expected):
    assert classify_schedule(cfg) == expected


@pytest.mark.parametrize(
    "cfg",
    [
        two_stage(20),
        jt_scratch(20),
        jt_ft(0, 20),
        jt_ft(5, 20),
        jt_ft(20, 20),
        linear(0.0, 0, 10, 20),
        linear(1.0, 5, 10, 20),
        logistic(0.5, 10.0, 0, 20, 20),
        ScheduleConfig("step", 0.5, 10.0, 10, 10, 20),
    ],
)
@pytest.mark.parametrize("factor", [2, 3, 25])
def test_classify_ignores_time_scale(cfg, factor):
    scaled = replace(cfg, T_start=cfg.T_start * factor, T_end=cfg.T_end * factor, T_max=cfg.T_max * factor)
    assert classify_schedule(scaled) == classify_schedule(cfg)


# ------------------------------------------------------------------------------
# schedule_curve
# ------------------------------------------------------------------------------
def test_two_stage_curve_is_flat():
    assert all(p == 0.0 for _, p in schedule_curve(two_stage(60), 50))


def test_step_curve_has_one_discontinuity():
    values = np.array([p for _, p in schedule_curve(jt_ft(15, 60), 120)])
    assert np.count_nonzero(np.diff(values)) == 1


def test_linear_curve_endpoints():
    curve = schedule_curve(linear(1.0, 0, 60, 60), 200)
    assert curve[0] == (0.0, 0.0)
    t_last, p_last = curve[-1]
    assert t_last < 60
    assert p_last == pytest.approx(t_last / 60)
    assert p_last > 0.99


def test_shapes_agree_at_ramp_ends():
    lin = linear(0.8, 0, 10, 10)
    log = logistic(0.8, 7.0, 0, 10, 10)
    lin_curve = dict(schedule_curve(lin, 1000))
    log_curve = dict(schedule_curve(log, 1000))
    assert abs(lin_curve[0.0] - log_curve[0.0]) < 1e-12


def test_curve_resolution_must_be_at_least_two():
    with pytest.raises(ScheduleError):
        schedule_curve(jt_ft(15, 60), 1)
