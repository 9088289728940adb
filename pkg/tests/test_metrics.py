"""Fairness and efficiency measures, with independent oracles."""

import numpy as np
import pytest

from corridorsim.metrics import (
    fairness_quartet,
    gini,
    horizontal_equity,
    mfd,
    significance,
    welch_p,
)
from corridorsim.microsim import ExitRecord, StepRecord


def gini_pairwise(values):
    """O(n^2) oracle: mean absolute pairwise difference over twice the mean."""
    x = np.asarray(values, dtype=float)
    total = x.sum()
    if total == 0:
        return 0.0
    diffs = np.abs(x[:, None] - x[None, :]).sum()
    return float(diffs / (2 * len(x) ** 2 * x.mean()))


def record(delay, cls="arterial", dist=1000.0, entry=0, exit_t=None, wait=None):
    exit_t = exit_t if exit_t is not None else entry + int(delay) + 60
    return ExitRecord(
        id=f"v{delay}", origin_class=cls, entry_time=entry, exit_time=exit_t,
        distance_m=dist, delay_s=float(delay),
        cumulative_wait_s=int(delay) if wait is None else wait,
    )


# -- gini -----------------------------------------------------------------


def test_gini_perfect_equality():
    assert gini([5, 5, 5, 5]) == 0.0


def test_gini_single_nonzero():
    assert gini([0, 0, 0, 1]) == pytest.approx(0.75)
    assert gini_pairwise([0, 0, 0, 1]) == pytest.approx(0.75)


def test_gini_arithmetic_sequence():
    assert gini([1, 2, 3, 4]) == pytest.approx(0.25)
    assert gini_pairwise([1, 2, 3, 4]) == pytest.approx(0.25)


def test_gini_matches_pairwise_oracle_random():
    rng = np.random.default_rng(42)
    for _ in range(200):
        n = int(rng.integers(1, 300))
        x = rng.exponential(10.0, size=n)
        assert gini(x) == pytest.approx(gini_pairwise(x), abs=1e-9)


def test_gini_scale_invariance_translation_decrease():
    rng = np.random.default_rng(7)
    for _ in range(50):
        x = rng.exponential(5.0, size=40) + 0.1
        g = gini(x)
        assert gini(3.5 * x) == pytest.approx(g, abs=1e-12)
        assert gini(x + 10.0) < g


def test_gini_empty_rejected_zeros_defined():
    with pytest.raises(ValueError):
        gini([])
    assert gini([0.0, 0.0]) == 0.0


# -- quartet -----------------------------------------------------------------


def test_quartet_single_vehicle():
    q = fairness_quartet([record(10, entry=0, exit_t=100)])
    assert q.gini == 0.0
    assert q.max_delay == 10.0
    assert q.total_travel_time_h == pytest.approx(100 / 3600)
    assert q.avg_delay == 10.0


def test_quartet_two_vehicles():
    q = fairness_quartet([record(0), record(100)])
    assert q.max_delay == 100.0
    assert q.avg_delay == 50.0
    assert q.gini == pytest.approx(0.5)


def test_quartet_uniform_zero_delays():
    records = [record(0, entry=i, exit_t=i + 80) for i in range(5)]
    q = fairness_quartet(records)
    assert q.gini == 0.0
    assert q.max_delay == 0.0
    assert q.total_travel_time_h == pytest.approx(5 * 80 / 3600)


def test_quartet_consistency_properties():
    rng = np.random.default_rng(3)
    delays = rng.integers(0, 500, size=60)
    records = [record(float(d), entry=i) for i, d in enumerate(delays)]
    q = fairness_quartet(records)
    assert q.avg_delay * len(records) == pytest.approx(float(delays.sum()))
    assert q.max_delay >= q.avg_delay


def test_quartet_empty_rejected():
    with pytest.raises(ValueError):
        fairness_quartet([])


# -- horizontal equity -----------------------------------------------------


def test_horizontal_all_arterial():
    table = horizontal_equity([record(10), record(20)])
    assert table["feeder"].count == 0
    assert table["arterial"].count == 2


def test_horizontal_feeder_double_delay():
    table = horizontal_equity([
        record(10), record(10),
        record(20, cls="feeder"), record(20, cls="feeder"),
    ])
    assert table["feeder"].median_delay == 2 * table["arterial"].median_delay
    assert table["feeder"].avg_delay == 2 * table["arterial"].avg_delay
    assert table["arterial"].gini == 0.0
    assert table["feeder"].gini == 0.0


def test_horizontal_mixed_hand_computed():
    records = [
        record(10, dist=1000.0), record(30, dist=2000.0), record(50, dist=1000.0),
        record(20, cls="feeder", dist=500.0), record(60, cls="feeder", dist=1000.0),
        record(100, cls="feeder", dist=2000.0),
    ]
    table = horizontal_equity(records)
    art, feed = table["arterial"], table["feeder"]
    assert art.avg_delay == pytest.approx(30.0)
    assert art.max_delay == 50.0
    assert art.median_delay == 30.0
    assert art.total_delay_h == pytest.approx(90 / 3600)
    assert art.gini == pytest.approx(gini_pairwise([10, 30, 50]), abs=1e-9)
    # per-km: delays over km distances
    assert feed.avg_per_km == pytest.approx(np.mean([40.0, 60.0, 50.0]))
    assert feed.max_per_km == pytest.approx(60.0)
    assert feed.gini_per_km == pytest.approx(gini_pairwise([40, 60, 50]), abs=1e-9)


def test_horizontal_partitions_ledger():
    records = [record(5), record(6, cls="feeder"), record(7, cls="internal")]
    table = horizontal_equity(records)
    assert table["arterial"].count + table["feeder"].count + table["internal"].count == 3


# -- MFD -----------------------------------------------------------------


def make_steps(exits_per_window, present=10, window=300, speed=5.0):
    steps = []
    exited = 0
    entered = 0
    for w, n in enumerate(exits_per_window):
        for i in range(window):
            now = 1 if i < n else 0
            exited += now
            entered += now
            steps.append(StepRecord(
                clock=w * window + i, vehicles_present=present,
                entered_cum=entered + present, exited_cum=exited, exited_now=now,
                moving=present, speed_sum=present * speed,
            ))
    return steps


def test_mfd_empty_network():
    steps = [StepRecord(t, 0, 0, 0, 0, 0, 0.0) for t in range(600)]
    bins = mfd(steps, 300)
    assert len(bins) == 2
    for b in bins:
        assert (b.flow, b.density, b.speed) == (0.0, 0.0, 0.0)


def test_mfd_constant_exits():
    bins = mfd(make_steps([10, 10, 10]), 300)
    assert [b.flow for b in bins] == [120.0, 120.0, 120.0]


def test_mfd_conservation():
    steps = make_steps([3, 17, 9, 4])
    bins = mfd(steps, 300)
    assert sum(b.flow for b in bins) * 300 / 3600 == steps[-1].exited_cum


def test_mfd_density_and_speed():
    bins = mfd(make_steps([5], present=42, speed=7.0), 300)
    assert bins[0].density == 42.0
    assert bins[0].speed == pytest.approx(7.0)


def test_mfd_ramp_density_monotone(corridor_scenario):
    from corridorsim.runner import run_single
    result = run_single(corridor_scenario, "scosca", seed=1, horizon=1800)
    bins = mfd(result.steps, 300)
    densities = [b.density for b in bins[:3]]
    assert densities == sorted(densities)  # fill-up phase


# -- significance markers -----------------------------------------------------


def test_identical_samples_no_marker():
    assert significance([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == ""


def test_disjoint_samples_strongest_marker():
    base = [float(x) for x in range(1, 21)]
    high = [float(x) for x in range(100, 120)]
    assert significance(base, high) == "+++"
    assert significance(high, base) == "---"


def test_marker_threshold_classification():
    rng = np.random.default_rng(0)
    base = list(rng.normal(10, 1.0, size=12))
    for shift in (0.05, 0.4, 0.8, 1.5, 4.0):
        sample = [x + shift for x in base] + [14.0]
        p = welch_p(base, sample)
        marker = significance(base, sample)
        if p >= 0.05:
            assert marker == ""
        elif p >= 0.02:
            assert marker == "+"
        elif p >= 0.01:
            assert marker == "++"
        else:
            assert marker == "+++"


def test_single_marker_near_p04():
    # Construct a pair whose Welch p lands between 0.02 and 0.05.
    base = [10.0, 11.0, 9.5, 10.5, 10.2, 9.8, 10.9, 9.6]
    sample = [x + 0.65 for x in base]
    p = welch_p(base, sample)
    assert 0.02 < p < 0.05
    assert significance(base, sample) == "+"


def test_too_few_seeds_rejected():
    with pytest.raises(ValueError):
        significance([1.0], [2.0, 3.0])
