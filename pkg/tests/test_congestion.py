"""Congestion arithmetic: smoothing, delay, zone levels, breaks, proximity."""

import numpy as np
import pytest

from oracles import exhaustive_jenks, jenks_cost
from tourmine.congestion import (
    CONGESTION_THRESHOLD,
    SpeedSeries,
    build_congestion_map,
    congestion_indicator,
    expand_by_proximity,
    jenks_breaks,
    period_of_minute,
    period_windows,
    segment_delay,
    smooth_speeds,
    zone_congestion_level,
)
from tourmine.types import TourDataError, Zone


def series(speeds, step=60, t0=0, length=1000.0, zone="Z"):
    return SpeedSeries("seg", zone, length, step, tuple(speeds), t0)


class TestSmoothing:
    def test_constant_series_unchanged(self):
        s = smooth_speeds(series([80.0] * 5), 3)
        assert s.speeds == (80.0,) * 5

    def test_window_one_is_identity(self):
        s = series([100.0, 50.0, 75.0])
        assert smooth_speeds(s, 1).speeds == s.speeds

    def test_forward_window_with_end_truncation(self):
        s = smooth_speeds(series([100.0, 80.0, 60.0]), 2)
        assert s.speeds == (90.0, 70.0, 60.0)

    def test_length_preserved(self):
        s = smooth_speeds(series(list(range(10, 100, 10))), 4)
        assert len(s.speeds) == 9

    def test_empty_series_rejected(self):
        with pytest.raises(ValueError):
            SpeedSeries("seg", "Z", 1000.0, 60, ())


class TestSegmentDelay:
    def test_constant_speed_zero_delay(self):
        assert segment_delay(series([100.0] * 24), (0, 1440)) == 0.0

    def test_worked_example(self):
        # free flow 120 over the day, 60 inside the window
        s = series([120.0, 120.0, 60.0, 120.0])
        d = segment_delay(s, (120, 180))
        assert d == pytest.approx(60.0 * (1 / 60.0 - 1 / 120.0), abs=1e-12)
        assert d == pytest.approx(0.5, abs=1e-12)

    def test_clamped_at_zero(self):
        # period minimum above the whole-series max cannot happen, but a
        # window capturing only the fastest samples yields exactly zero
        s = series([100.0, 80.0])
        assert segment_delay(s, (0, 60)) == 0.0

    def test_no_samples_in_period(self):
        with pytest.raises(TourDataError):
            segment_delay(series([100.0] * 4), (600, 660))


class TestZoneLevel:
    def test_single_segment(self):
        assert zone_congestion_level([(series([1.0]), 0.3)]) == pytest.approx(0.3)

    def test_length_weighted_mean(self):
        pairs = [
            (series([1.0], length=1000.0), 0.2),
            (series([1.0], length=3000.0), 0.6),
        ]
        assert zone_congestion_level(pairs) == pytest.approx(0.5, abs=1e-12)

    def test_all_zero(self):
        assert zone_congestion_level([(series([1.0]), 0.0)] * 3) == 0.0

    def test_empty_zone_is_no_data(self):
        with pytest.raises(TourDataError):
            zone_congestion_level([])

    def test_split_invariance(self):
        # splitting one segment into two of equal delay leaves CL unchanged
        rng = np.random.default_rng(5)
        for _ in range(20):
            lengths = rng.uniform(100, 5000, size=4)
            delays = rng.uniform(0, 2, size=4)
            base = zone_congestion_level(
                [(series([1.0], length=l), d) for l, d in zip(lengths, delays)]
            )
            split = [(series([1.0], length=lengths[0] / 2), delays[0])] * 2 + [
                (series([1.0], length=l), d) for l, d in zip(lengths[1:], delays[1:])
            ]
            assert zone_congestion_level(split) == pytest.approx(base, rel=1e-9)


class TestIndicator:
    def test_above_threshold(self):
        assert congestion_indicator(0.5) == 1

    def test_zero(self):
        assert congestion_indicator(0.0) == 0

    def test_exact_threshold_is_not_congested(self):
        assert congestion_indicator(10.0 / 60.0) == 0

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            congestion_indicator(-0.1)


class TestPeriods:
    def test_windows_partition_day(self):
        minutes = np.arange(1440)
        seen = set()
        for period in ("morning", "midday", "afternoon", "rest"):
            for start, end in period_windows(period):
                seen.update(range(start, end))
        assert seen == set(minutes)

    def test_period_of_minute_wraps(self):
        assert period_of_minute(400) == "morning"
        assert period_of_minute(100) == "rest"
        assert period_of_minute(1200) == "rest"
        assert period_of_minute(1440 + 400) == "morning"


class TestJenks:
    def test_two_clusters(self):
        assert jenks_breaks([1, 2, 3, 100, 101, 102], 2) == [3.0]

    def test_k_one_no_breaks(self):
        assert jenks_breaks([1, 2, 3], 1) == []

    def test_degenerate_input(self):
        with pytest.raises(ValueError):
            jenks_breaks([5, 5, 5, 5], 2)

    def test_matches_exhaustive_enumeration(self):
        rng = np.random.default_rng(11)
        for trial in range(30):
            n = int(rng.integers(5, 21))
            k = int(rng.integers(2, min(5, n) + 1))
            values = rng.normal(0, 10, size=n)
            got = jenks_breaks(values, k)
            want, want_cost = exhaustive_jenks(values, k)
            assert got == pytest.approx(want, abs=1e-9), f"trial {trial}"
            assert jenks_cost(values, got) == pytest.approx(want_cost, abs=1e-9)


def make_zones(rng, n):
    return [
        Zone(f"z{i}", f"{1000 + i}", (float(x), float(y)))
        for i, (x, y) in enumerate(rng.uniform(0, 50000, size=(n, 2)))
    ]


class TestProximity:
    def test_zero_radius_identity(self):
        rng = np.random.default_rng(0)
        zones = make_zones(rng, 10)
        congested = {"z0", "z3"}
        assert expand_by_proximity(zones, congested, 0.0) == congested

    def test_distance_comparison(self):
        zones = [
            Zone("a", "1000", (0.0, 0.0)),
            Zone("b", "2000", (5000.0, 0.0)),
            Zone("c", "3000", (7000.0, 0.0)),
        ]
        out = expand_by_proximity(zones, {"a"}, 6423.0)
        assert out == {"a", "b"}

    def test_monotone_in_radius_and_deterministic(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            zones = make_zones(rng, int(rng.integers(3, 15)))
            congested = {z.zone_id for z in zones if rng.random() < 0.3}
            radii = sorted(rng.uniform(0, 40000, size=3))
            previous = set(congested)
            for r in radii:
                expanded = expand_by_proximity(zones, congested, r)
                assert expanded >= previous or r == radii[0]
                assert expanded >= congested
                assert expanded == expand_by_proximity(zones, congested, r)
                previous = expanded


class TestMapAssembly:
    def test_planted_dip_flags_all_periods(self):
        steps = 96
        congested = SpeedSeries("s1", "Zc", 1000.0, 15, (100.0,) + (25.0,) * (steps - 1))
        free = SpeedSeries("s2", "Zf", 1000.0, 15, (100.0,) * steps)
        cmap = build_congestion_map([congested, free])
        for period in ("morning", "midday", "afternoon", "rest"):
            assert cmap.is_congested("Zc", period)
            assert not cmap.is_congested("Zf", period)
            assert cmap.level("Zf", period) == 0.0

    def test_threshold_is_strict(self):
        assert CONGESTION_THRESHOLD == pytest.approx(1 / 6)


def test_wide_form_speeds_load(tmp_path):
    from tourmine.congestion import load_speed_series

    path = tmp_path / "speeds.csv"
    path.write_text(
        "segment_id,zone_id,length_m,step_minutes,t0,v0,v1,v2\n"
        "segA,Z1,800,60,0,100,80,60\n"
        "segB,Z2,1200,30,120,90,90,90\n"
    )
    series = {s.segment_id: s for s in load_speed_series(path)}
    assert series["segA"].speeds == (100.0, 80.0, 60.0)
    assert series["segA"].zone_id == "Z1"
    assert series["segB"].t0_minute == 120
    assert series["segB"].step_minutes == 30


def test_long_form_round_trip(tmp_path):
    from tourmine.congestion import load_speed_series, save_speed_series

    original = [
        SpeedSeries("s1", "Z1", 800.0, 15, (100.0, 50.0, 75.0)),
        SpeedSeries("s2", "Z2", 1200.0, 15, (90.0, 90.0)),
    ]
    path = save_speed_series(original, tmp_path / "speeds.csv")
    assert load_speed_series(path) == original
