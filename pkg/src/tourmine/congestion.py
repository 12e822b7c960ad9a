"""Zonal congestion indicators from loop-detector speed series.

Per segment: smooth speeds with a forward moving average, then delay in
minutes per kilometer is ``60 * (1/v_min - 1/v_free)`` where ``v_min`` is
the slowest smoothed speed inside the period and ``v_free`` the fastest
smoothed speed of the whole series.  Zone congestion level is the
length-weighted mean of its segment delays; a zone counts as congested
when the level exceeds 10 seconds per kilometer.  Congested sets can be
expanded to zones whose centroids lie within a radius of a congested
zone's centroid; Jenks natural breaks over the proximity distances are
reported so users can pick a different cut.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from tourmine.types import TourDataError, Zone

#: Daypart boundaries in minutes after midnight: rest | morning | midday | afternoon | rest.
DEFAULT_PERIOD_EDGES = (373, 638, 893, 1172)
CONGESTION_PERIODS = ("morning", "midday", "afternoon", "rest")

#: Congestion threshold: 10 seconds delay per kilometer, in min/km.
CONGESTION_THRESHOLD = 10.0 / 60.0


@dataclass(frozen=True)
class SpeedSeries:
    """Evenly spaced average speeds (km/h) for one road segment."""

    segment_id: str
    zone_id: str
    length_m: float
    step_minutes: int
    speeds: tuple[float, ...]
    t0_minute: int = 0

    def __post_init__(self):
        if self.length_m <= 0:
            raise ValueError(f"segment {self.segment_id}: length must be positive")
        if self.step_minutes <= 0:
            raise ValueError(f"segment {self.segment_id}: step_minutes must be positive")
        if not self.speeds:
            raise ValueError(f"segment {self.segment_id}: empty speed series")
        if any(v <= 0 for v in self.speeds):
            raise ValueError(f"segment {self.segment_id}: speeds must be positive")
        object.__setattr__(self, "speeds", tuple(float(v) for v in self.speeds))

    def sample_minutes(self) -> np.ndarray:
        return self.t0_minute + self.step_minutes * np.arange(len(self.speeds))


@dataclass
class ProximityConfig:
    jenks_classes: int = 5
    congested_radius_m: float = 6423.0

    def __post_init__(self):
        if self.jenks_classes < 2:
            raise ValueError("jenks_classes must be >= 2")
        if self.congested_radius_m < 0:
            raise ValueError("radius must be non-negative")


@dataclass
class CongestionMap:
    """Zone x period congestion levels plus the congested zone sets.

    ``congested`` starts as the strict-threshold indicator sets and may be
    enlarged by :func:`expand_map_by_proximity`; ``levels`` always holds
    the raw computed CL values.  Zones without any speed data are listed
    in ``no_data`` and answer ``False`` to :meth:`is_congested`.
    """

    levels: dict[tuple[str, str], float] = field(default_factory=dict)
    congested: dict[str, set[str]] = field(default_factory=dict)
    no_data: set[str] = field(default_factory=set)
    threshold: float = CONGESTION_THRESHOLD

    def is_congested(self, zone_id: str, period: str) -> bool:
        return zone_id in self.congested.get(period, set())

    def level(self, zone_id: str, period: str) -> float | None:
        return self.levels.get((zone_id, period))


def period_of_minute(minute: float, edges=DEFAULT_PERIOD_EDGES) -> str:
    """Map a clock minute (wrapping over midnight) onto one of the four dayparts."""
    m = minute % 1440
    e1, e2, e3, e4 = edges
    if m < e1 or m >= e4:
        return "rest"
    if m < e2:
        return "morning"
    if m < e3:
        return "midday"
    return "afternoon"


def period_windows(period: str, edges=DEFAULT_PERIOD_EDGES) -> list[tuple[int, int]]:
    """Half-open minute intervals covered by a daypart; rest wraps midnight."""
    e1, e2, e3, e4 = edges
    table = {
        "morning": [(e1, e2)],
        "midday": [(e2, e3)],
        "afternoon": [(e3, e4)],
        "rest": [(0, e1), (e4, 1440)],
    }
    try:
        return table[period]
    except KeyError:
        raise ValueError(f"unknown period {period!r}") from None


def smooth_speeds(series: SpeedSeries, window: int) -> SpeedSeries:
    """Forward moving average over ``window`` steps, truncated at the series end."""
    if window < 1:
        raise ValueError("window must be >= 1")
    v = np.asarray(series.speeds, dtype=float)
    if window == 1:
        return series
    csum = np.concatenate([[0.0], np.cumsum(v)])
    n = len(v)
    out = np.empty(n)
    for i in range(n):
        j = min(i + window, n)
        out[i] = (csum[j] - csum[i]) / (j - i)
    return replace(series, speeds=tuple(out))


def segment_delay(series: SpeedSeries, period) -> float:
    """Delay in min/km inside ``period`` (a (start, end) pair or list of pairs).

    The series is expected to be smoothed already.  Negative differences
    (period minimum above the series-wide free-flow speed) clamp to zero.
    """
    windows = [period] if isinstance(period, tuple) else list(period)
    minutes = series.sample_minutes() % 1440
    v = np.asarray(series.speeds, dtype=float)
    mask = np.zeros(len(v), dtype=bool)
    for start, end in windows:
        mask |= (minutes >= start) & (minutes < end)
    if not mask.any():
        raise TourDataError(
            f"segment {series.segment_id}: no samples inside period {windows}"
        )
    v_min = float(v[mask].min())
    v_free = float(v.max())
    return max(0.0, 60.0 * (1.0 / v_min - 1.0 / v_free))


def zone_congestion_level(segments: list[tuple[SpeedSeries, float]]) -> float:
    """Length-weighted mean of (series, delay) pairs belonging to one zone."""
    if not segments:
        raise TourDataError("zone has no segments (no-data)")
    total_len = sum(s.length_m for s, _ in segments)
    return sum(s.length_m * d for s, d in segments) / total_len


def congestion_indicator(level: float, threshold: float = CONGESTION_THRESHOLD) -> int:
    """1 iff the congestion level strictly exceeds the threshold."""
    if level < 0:
        raise ValueError("congestion level must be non-negative")
    return int(level > threshold)


def build_congestion_map(
    series_list: list[SpeedSeries],
    smooth_window: int = 2,
    edges=DEFAULT_PERIOD_EDGES,
    threshold: float = CONGESTION_THRESHOLD,
) -> CongestionMap:
    """Smooth every segment, aggregate per zone and period, apply the indicator."""
    by_zone: dict[str, list[SpeedSeries]] = {}
    for series in series_list:
        by_zone.setdefault(series.zone_id, []).append(smooth_speeds(series, smooth_window))
    cmap = CongestionMap(threshold=threshold)
    cmap.congested = {p: set() for p in CONGESTION_PERIODS}
    for zone_id in sorted(by_zone):
        for period in CONGESTION_PERIODS:
            windows = period_windows(period, edges)
            pairs = []
            for series in by_zone[zone_id]:
                try:
                    pairs.append((series, segment_delay(series, windows)))
                except TourDataError:
                    continue
            if not pairs:
                continue
            level = zone_congestion_level(pairs)
            cmap.levels[(zone_id, period)] = level
            if congestion_indicator(level, threshold):
                cmap.congested[period].add(zone_id)
    return cmap


def jenks_breaks(values, k: int) -> list[float]:
    """Exact natural-breaks classification of 1-D values into ``k`` classes.

    Returns the k-1 ascending break points (the largest value of each
    class except the last), minimizing the total within-class sum of
    squared deviations by dynamic programming.
    """
    data = np.sort(np.asarray(list(values), dtype=float))
    n = len(data)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        return []
    if len(np.unique(data)) < k:
        raise ValueError(f"need at least {k} distinct values for {k} classes")

    prefix = np.concatenate([[0.0], np.cumsum(data)])
    prefix_sq = np.concatenate([[0.0], np.cumsum(data**2)])

    def ssd(i: int, j: int) -> float:
        # inclusive bounds over sorted data
        count = j - i + 1
        total = prefix[j + 1] - prefix[i]
        return max(0.0, (prefix_sq[j + 1] - prefix_sq[i]) - total * total / count)

    inf = float("inf")
    cost = np.full((k + 1, n + 1), inf)
    split = np.zeros((k + 1, n + 1), dtype=int)
    cost[0][0] = 0.0
    for m in range(1, k + 1):
        for j in range(m, n + 1):
            best, best_i = inf, m - 1
            for i in range(m - 1, j):
                c = cost[m - 1][i] + ssd(i, j - 1)
                if c < best:
                    best, best_i = c, i
            cost[m][j] = best
            split[m][j] = best_i
    bounds = []
    j = n
    for m in range(k, 0, -1):
        i = split[m][j]
        bounds.append((i, j - 1))
        j = i
    bounds.reverse()
    return [float(data[hi]) for _, hi in bounds[:-1]]


def proximity_distances(zones: list[Zone], congested: set[str]) -> dict[str, float]:
    """Each zone's Euclidean centroid distance to the nearest congested zone."""
    centers = np.array([zones_by_id(zones)[z].centroid for z in sorted(congested)], dtype=float)
    if len(centers) == 0:
        return {}
    out = {}
    for zone in zones:
        point = np.asarray(zone.centroid, dtype=float)
        out[zone.zone_id] = float(np.min(np.linalg.norm(centers - point, axis=1)))
    return out


def zones_by_id(zones: list[Zone]) -> dict[str, Zone]:
    return {z.zone_id: z for z in zones}


def expand_by_proximity(zones: list[Zone], congested: set[str], radius_m: float) -> set[str]:
    """Add every zone strictly closer than ``radius_m`` to a congested centroid.

    Single-pass: distances are measured to the zones congested on input,
    not to newly added ones, so the result is a superset of the input and
    monotone in the radius.
    """
    result = set(congested)
    if radius_m <= 0 or not congested:
        return result
    distances = proximity_distances(zones, congested)
    for zone in zones:
        if distances[zone.zone_id] < radius_m:
            result.add(zone.zone_id)
    return result


def expand_map_by_proximity(
    cmap: CongestionMap, zones: list[Zone], radius_m: float
) -> CongestionMap:
    """New map whose per-period congested sets include proximity additions."""
    expanded = {
        period: expand_by_proximity(zones, members, radius_m)
        for period, members in cmap.congested.items()
    }
    return CongestionMap(dict(cmap.levels), expanded, set(cmap.no_data), cmap.threshold)


# ---------------------------------------------------------------------------
# file formats


def load_speed_series(path) -> list[SpeedSeries]:
    """Read speeds.csv in wide (v0, v1, ...) or long (step, speed) form."""
    df = pd.read_csv(path)
    meta = {"segment_id", "zone_id", "length_m", "step_minutes", "t0"}
    if {"step", "speed"}.issubset(df.columns):
        out = []
        for seg_id, group in df.groupby("segment_id", sort=True):
            group = group.sort_values("step")
            first = group.iloc[0]
            out.append(
                SpeedSeries(
                    str(seg_id),
                    str(first["zone_id"]),
                    float(first["length_m"]),
                    int(first["step_minutes"]),
                    tuple(group["speed"].astype(float)),
                    int(first.get("t0", 0)),
                )
            )
        return out
    value_cols = [c for c in df.columns if c not in meta]
    out = []
    for _, row in df.iterrows():
        speeds = [float(row[c]) for c in value_cols if row[c] == row[c]]
        out.append(
            SpeedSeries(
                str(row["segment_id"]),
                str(row["zone_id"]),
                float(row["length_m"]),
                int(row["step_minutes"]),
                tuple(speeds),
                int(row["t0"]) if "t0" in df.columns else 0,
            )
        )
    return out


def save_speed_series(series_list: list[SpeedSeries], path) -> Path:
    path = Path(path)
    rows = []
    for s in series_list:
        for step, speed in enumerate(s.speeds):
            rows.append(
                {
                    "segment_id": s.segment_id,
                    "zone_id": s.zone_id,
                    "length_m": s.length_m,
                    "step_minutes": s.step_minutes,
                    "t0": s.t0_minute,
                    "step": step,
                    "speed": speed,
                }
            )
    pd.DataFrame(rows).to_csv(path, index=False)
    return path


def save_congestion_map(cmap: CongestionMap, path) -> Path:
    """congestion.csv with the effective (possibly expanded) indicator."""
    path = Path(path)
    zone_ids = sorted({z for z, _ in cmap.levels} | {z for s in cmap.congested.values() for z in s})
    rows = []
    for zone_id in zone_ids:
        for period in CONGESTION_PERIODS:
            level = cmap.levels.get((zone_id, period))
            rows.append(
                {
                    "zone_id": zone_id,
                    "period": period,
                    "CL": "" if level is None else level,
                    "CI": int(cmap.is_congested(zone_id, period)),
                }
            )
    pd.DataFrame(rows, columns=["zone_id", "period", "CL", "CI"]).to_csv(path, index=False)
    return path


def load_congestion_map(path, threshold: float = CONGESTION_THRESHOLD) -> CongestionMap:
    df = pd.read_csv(path, keep_default_na=False)
    cmap = CongestionMap(threshold=threshold)
    cmap.congested = {p: set() for p in CONGESTION_PERIODS}
    for _, row in df.iterrows():
        zone_id, period = str(row["zone_id"]), str(row["period"])
        if row["CL"] != "":
            cmap.levels[(zone_id, period)] = float(row["CL"])
        if int(row["CI"]) == 1:
            cmap.congested.setdefault(period, set()).add(zone_id)
    return cmap


def save_breaks(breaks_by_period: dict[str, list[float]], path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(breaks_by_period, indent=2, sort_keys=True))
    return path
