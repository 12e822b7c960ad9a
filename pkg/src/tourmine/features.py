"""Tour-level feature and target construction.

One matrix row per tour: day of week, visited-activity flags, congestion
flags at arrival time, initial-load weight factor, shipment counts, empty
trips, vehicle type and depot-to-customer-median tour length, plus the
three response variables (departure class, tour type, number of stops).
Numeric features are also emitted as categorical bins so the decision
tree can consume them directly.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from tourmine.congestion import DEFAULT_PERIOD_EDGES, CongestionMap, period_of_minute
from tourmine.types import Dataset, StopRecord, TourRecord

logger = logging.getLogger(__name__)

DEPARTURE_CLASSES = ("morning", "midday", "afternoon", "night")
TOUR_TYPES = ("direct", "collection", "distribution")

#: Matrix columns the tree consumes (all categorical).
COVARIATE_COLUMNS = (
    "day_of_week",
    "visit_dc",
    "visit_tt",
    "first_stop_congested",
    "later_stop_congested",
    "wf_cat",
    "n_commodities_cat",
    "empty_any",
    "vehicle_type",
    "tour_length_cat",
)
TARGET_COLUMNS = ("departure_class", "tour_type", "n_stops")

#: Covariates whose levels carry a meaningful order (for direction-of-impact).
ORDERED_COVARIATES = ("wf_cat", "n_commodities_cat", "tour_length_cat")


@dataclass
class FeatureConfig:
    departure_edges: tuple[int, int, int, int] = DEFAULT_PERIOD_EDGES
    tour_length_breaks_km: tuple[float, ...] = (22.0, 44.0, 64.0, 95.0, 107.0)
    n_commodity_breaks: tuple[int, ...] = (2, 7)
    wf_breaks: tuple[float, ...] = (1.0 / 3.0, 2.0 / 3.0)
    weiszfeld_tol: float = 1e-6
    market_of_item: dict[str, str] = field(default_factory=dict)
    weight_max_by_market: dict[str, float] = field(default_factory=dict)
    max_stops_warn: int = 33

    def to_json_dict(self) -> dict:
        return {
            "departure_edges": list(self.departure_edges),
            "tour_length_breaks_km": list(self.tour_length_breaks_km),
            "n_commodity_breaks": list(self.n_commodity_breaks),
            "wf_breaks": list(self.wf_breaks),
            "weiszfeld_tol": self.weiszfeld_tol,
            "market_of_item": dict(self.market_of_item),
            "weight_max_by_market": dict(self.weight_max_by_market),
            "covariates": list(COVARIATE_COLUMNS),
            "targets": list(TARGET_COLUMNS),
            "ordered_covariates": list(ORDERED_COVARIATES),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "FeatureConfig":
        kwargs = {}
        for key in (
            "departure_edges",
            "tour_length_breaks_km",
            "n_commodity_breaks",
            "wf_breaks",
        ):
            if key in d:
                kwargs[key] = tuple(d[key])
        for key in ("weiszfeld_tol",):
            if key in d:
                kwargs[key] = d[key]
        for key in ("market_of_item", "weight_max_by_market"):
            if key in d:
                kwargs[key] = dict(d[key])
        return cls(**kwargs)


@dataclass(frozen=True)
class FeatureVector:
    tour_id: str
    day_of_week: int
    visit_dc: int
    visit_tt: int
    first_stop_congested: int
    later_stop_congested: int
    weight_factor: float  # NaN when the initial load has zero weight
    n_commodities: int
    empty_any: int
    vehicle_type: str
    avg_tour_length_km: float
    market: str


@dataclass(frozen=True)
class TargetVector:
    departure_class: str
    tour_type: str
    n_stops: int


def weight_factor(w: float, w_max: float) -> float:
    """Initial-load weight factor in [0, 1): 0 is the heaviest possible load."""
    if w_max <= 0:
        raise ValueError(f"w_max must be positive, got {w_max}")
    if w <= 0:
        raise ValueError(f"w must be positive, got {w}")
    if w > w_max:
        raise ValueError(f"w={w} exceeds w_max={w_max}")
    return (w_max - w) / w_max


def geometric_median(points, tol: float = 1e-6, max_iter: int = 10_000, return_objectives: bool = False):
    """Point minimizing the summed Euclidean distance to ``points``.

    An input point with multiplicity at least the norm of the unit-vector
    pull of the remaining points is the exact optimum, so those are
    checked first (the iteration would only crawl toward them).  Otherwise
    Weiszfeld iteration runs from the centroid; an iterate landing within
    ``tol`` of an input point escapes by a ``tol``-sized step along the
    local descent direction (deterministic for fixed inputs), which keeps
    the objective non-increasing for small ``tol``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) == 0:
        raise ValueError("points must be a non-empty (n, d) array")
    if tol <= 0:
        raise ValueError("tol must be positive")

    def objective(x):
        return float(np.linalg.norm(pts - x, axis=1).sum())

    if len(pts) == 1:
        result = pts[0].copy()
        return (result, [objective(result)]) if return_objectives else result

    for anchor in np.unique(pts, axis=0):
        dists = np.linalg.norm(pts - anchor, axis=1)
        at_anchor = dists == 0.0
        rest = pts[~at_anchor]
        if len(rest) == 0:
            best = anchor.copy()
            return (best, [objective(best)]) if return_objectives else best
        pull = np.linalg.norm(
            ((rest - anchor) / np.linalg.norm(rest - anchor, axis=1)[:, None]).sum(axis=0)
        )
        if pull <= at_anchor.sum():
            best = anchor.copy()
            return (best, [objective(best)]) if return_objectives else best

    x = pts.mean(axis=0)
    objectives = [objective(x)]
    prev_step = None
    ratios: list[float] = []
    for _ in range(max_iter):
        dists = np.linalg.norm(pts - x, axis=1)
        near = dists < tol
        if near.any():
            anchor = pts[int(np.argmin(dists))]
            at_anchor = np.linalg.norm(pts - anchor, axis=1) < tol
            eta = int(at_anchor.sum())
            rest = pts[~at_anchor]
            if len(rest) == 0:
                x = anchor
                break
            diffs = rest - anchor
            norms = np.linalg.norm(diffs, axis=1)
            direction = (diffs / norms[:, None]).sum(axis=0)
            pull = float(np.linalg.norm(direction))
            if pull <= eta:
                x = anchor
                objectives.append(objective(x))
                break
            x = anchor + (tol * direction / pull)
            objectives.append(objective(x))
            prev_step = None
            continue
        weights = 1.0 / dists
        x_new = (pts * weights[:, None]).sum(axis=0) / weights.sum()
        objectives.append(objective(x_new))
        step = float(np.linalg.norm(x_new - x))
        x = x_new
        if step == 0.0:
            break
        # the iteration converges linearly; bound the remaining distance by
        # step * rho / (1 - rho), estimating rho conservatively as the worst
        # contraction over the last few steps
        if prev_step is not None and prev_step > 0:
            ratios.append(step / prev_step)
            if len(ratios) > 5:
                ratios.pop(0)
            rho = max(ratios)
            if len(ratios) >= 3 and rho < 1.0:
                if step * rho / (1.0 - rho) < tol / 2 and step < tol:
                    break
        prev_step = step
    if return_objectives:
        return x, objectives
    return x


def average_tour_length(depot, customers, tol: float = 1e-6) -> float:
    """Distance in km from the depot to the geometric median of the customers."""
    if len(customers) == 0:
        raise ValueError("customers must be non-empty")
    median = geometric_median(customers, tol=tol)
    return float(np.linalg.norm(median - np.asarray(depot, dtype=float))) / 1000.0


def discretize_departure(minute: int, edges=DEFAULT_PERIOD_EDGES) -> str:
    """Departure-time class; the pre-dawn and late-evening bins merge into night."""
    if not 0 <= minute < 1440:
        raise ValueError(f"minute out of range: {minute}")
    e1, e2, e3, e4 = edges
    if minute < e1 or minute >= e4:
        return "night"
    if minute < e2:
        return "morning"
    if minute < e3:
        return "midday"
    return "afternoon"


def derive_departure_edges(minutes, n_bins: int = 5) -> tuple[int, int, int, int]:
    """Re-derive class edges from observed departures by equal-frequency binning.

    The first and last bins both map to night, so only the four inner
    quantile edges are returned.  Approximation of density-based
    discretization for when re-binning on local data is wanted.
    """
    values = np.sort(np.asarray(list(minutes), dtype=float))
    if len(values) < n_bins:
        raise ValueError("not enough observations to re-derive edges")
    qs = [i / n_bins for i in range(1, n_bins)]
    edges = [int(round(float(np.quantile(values, q)))) for q in qs]
    for i in range(1, len(edges)):
        if edges[i] <= edges[i - 1]:
            edges[i] = edges[i - 1] + 1
    if edges[-1] >= 1440:
        raise ValueError("degenerate departure distribution; cannot re-bin")
    return tuple(edges)  # type: ignore[return-value]


def classify_tour_type(stops) -> str:
    """Tour taxonomy from the ordered stop kinds.

    Exactly one pickup and one delivery is a direct tour; otherwise the
    majority stop kind decides (ties go to distribution).
    """
    kinds = [s.kind if isinstance(s, StopRecord) else str(s) for s in stops]
    if len(kinds) < 2:
        raise ValueError("need at least 2 stops to classify a tour")
    pickups = sum(1 for k in kinds if k == "pickup")
    deliveries = len(kinds) - pickups
    if pickups == 1 and deliveries == 1:
        return "direct"
    if deliveries >= pickups:
        return "distribution"
    return "collection"


def arrival_congestion_flags(
    tour: TourRecord,
    cmap: CongestionMap,
    dataset: Dataset,
    edges=DEFAULT_PERIOD_EDGES,
) -> tuple[int, int]:
    """(first stop congested, any later stop congested) at the arrival period.

    Arrival at stop k is the departure minute plus the summed travel times
    of the preceding legs; arrivals wrap over midnight.
    """
    minute = float(tour.departure_minute)
    first = int(cmap.is_congested(tour.stops[0].zone_id, period_of_minute(minute, edges)))
    later = 0
    for prev, stop in zip(tour.stops, tour.stops[1:]):
        minute += dataset.travel_minutes(prev.zone_id, stop.zone_id)
        if cmap.is_congested(stop.zone_id, period_of_minute(minute, edges)):
            later = 1
    return first, later


def _bin_label(value: float, breaks, prefix: str) -> str:
    """Half-open bins: (-inf, b1], (b1, b2], ..., (bk, inf) labeled 1..k+1."""
    idx = int(np.searchsorted(np.asarray(breaks, dtype=float), value, side="left"))
    return f"{prefix}{idx + 1}"


def market_of_tour(items, config: FeatureConfig) -> str:
    """Majority market segment of the tour's picked-up commodities."""
    votes: dict[str, int] = {}
    for item in items:
        market = config.market_of_item.get(item)
        if market is not None:
            votes[market] = votes.get(market, 0) + 1
    if not votes:
        return "all"
    best = max(sorted(votes), key=lambda m: votes[m])
    return best


def build_rows(
    dataset: Dataset, cmap: CongestionMap, config: FeatureConfig | None = None
) -> list[tuple[FeatureVector, TargetVector]]:
    """One (features, targets) pair per usable tour.

    Tours are skipped, with a log entry, when they carry a low-confidence
    imputation, still have unknown activity types, have fewer than two
    stops, or have no shipments.
    """
    config = config or FeatureConfig()
    shipments_by_tour: dict[str, list] = {}
    for s in dataset.shipments:
        shipments_by_tour.setdefault(s.tour_id, []).append(s)

    # Per-market maximum initial load, from the supplied rows unless pinned.
    weights: dict[str, float] = {}
    markets: dict[str, str] = {}
    loads: dict[str, float] = {}
    for tour in dataset.tours:
        shipments = shipments_by_tour.get(tour.tour_id, [])
        if not shipments:
            continue
        items = [s.commodity_code for s in shipments if s.commodity_code]
        markets[tour.tour_id] = market_of_tour(items, config)
        loads[tour.tour_id] = _initial_load(tour, shipments)
    w_max = dict(config.weight_max_by_market)
    if not w_max:
        for tour_id, load in loads.items():
            market = markets[tour_id]
            w_max[market] = max(w_max.get(market, 0.0), load)

    rows: list[tuple[FeatureVector, TargetVector]] = []
    skipped = {"low_confidence": 0, "unknown_activity": 0, "too_few_stops": 0, "no_shipments": 0}
    for tour in dataset.tours:
        shipments = shipments_by_tour.get(tour.tour_id, [])
        if not shipments:
            skipped["no_shipments"] += 1
            continue
        if any(stop.low_confidence for stop in tour.stops):
            skipped["low_confidence"] += 1
            continue
        if any(stop.activity_type == "unknown" for stop in tour.stops):
            skipped["unknown_activity"] += 1
            continue
        if len(tour.stops) < 2:
            skipped["too_few_stops"] += 1
            continue

        market = markets[tour.tour_id]
        load = loads[tour.tour_id]
        market_max = w_max.get(market, 0.0)
        if load <= 0 or market_max <= 0:
            wf = float("nan")
        elif load > market_max:
            warnings.warn(
                f"tour {tour.tour_id}: initial load {load} exceeds market maximum "
                f"{market_max}; weight factor clamped to 0",
                stacklevel=2,
            )
            wf = 0.0
        else:
            wf = weight_factor(load, market_max)

        first, later = arrival_congestion_flags(tour, cmap, dataset, config.departure_edges)
        depot = dataset.zones[tour.stops[0].zone_id].centroid
        customers = [dataset.zones[s.zone_id].centroid for s in tour.stops[1:]]
        length_km = average_tour_length(depot, customers, tol=config.weiszfeld_tol)
        n_stops = len(tour.stops)
        if n_stops > config.max_stops_warn:
            logger.warning("tour %s has %d stops (> %d)", tour.tour_id, n_stops, config.max_stops_warn)

        features = FeatureVector(
            tour_id=tour.tour_id,
            day_of_week=tour.day_of_week,
            visit_dc=int(any(s.activity_type == "DC" for s in tour.stops)),
            visit_tt=int(any(s.activity_type == "TT" for s in tour.stops)),
            first_stop_congested=first,
            later_stop_congested=later,
            weight_factor=wf,
            n_commodities=len(shipments),
            empty_any=int(any(s.empty_flag for s in shipments)),
            vehicle_type=tour.vehicle_type,
            avg_tour_length_km=length_km,
            market=market,
        )
        targets = TargetVector(
            departure_class=discretize_departure(tour.departure_minute, config.departure_edges),
            tour_type=classify_tour_type(tour.stops),
            n_stops=n_stops,
        )
        rows.append((features, targets))
    if any(skipped.values()):
        logger.info("skipped tours: %s", {k: v for k, v in skipped.items() if v})
    return rows


def _initial_load(tour: TourRecord, shipments) -> float:
    """Total weight loaded at the tour's first loading stop."""
    first_pickup = next((s for s in tour.stops if s.kind == "pickup"), tour.stops[0])
    at_first = [s.weight_kg for s in shipments if s.load_zone == first_pickup.zone_id]
    if at_first:
        return float(sum(at_first))
    return float(sum(s.weight_kg for s in shipments))


def build_matrix(
    dataset: Dataset, cmap: CongestionMap, config: FeatureConfig | None = None
) -> pd.DataFrame:
    """Tabular feature/target matrix with binned categorical columns."""
    config = config or FeatureConfig()
    records = []
    for fv, tv in build_rows(dataset, cmap, config):
        records.append(
            {
                "tour_id": fv.tour_id,
                "day_of_week": str(fv.day_of_week),
                "visit_dc": str(fv.visit_dc),
                "visit_tt": str(fv.visit_tt),
                "first_stop_congested": str(fv.first_stop_congested),
                "later_stop_congested": str(fv.later_stop_congested),
                "weight_factor": fv.weight_factor,
                "wf_cat": (
                    "wf_undefined"
                    if fv.weight_factor != fv.weight_factor
                    else _bin_label(fv.weight_factor, config.wf_breaks, "wf_")
                ),
                "n_commodities": fv.n_commodities,
                "n_commodities_cat": _bin_label(fv.n_commodities, config.n_commodity_breaks, "fns_"),
                "empty_any": str(fv.empty_any),
                "vehicle_type": fv.vehicle_type,
                "avg_tour_length_km": fv.avg_tour_length_km,
                "tour_length_cat": _bin_label(
                    fv.avg_tour_length_km, config.tour_length_breaks_km, "dist_"
                ),
                "market": fv.market,
                "departure_class": tv.departure_class,
                "tour_type": tv.tour_type,
                "n_stops": tv.n_stops,
            }
        )
    return pd.DataFrame(records)


def save_matrix(matrix: pd.DataFrame, path) -> Path:
    path = Path(path)
    matrix.to_csv(path, index=False)
    return path


def load_matrix(path) -> pd.DataFrame:
    df = pd.read_csv(path, keep_default_na=False)
    categorical = set(COVARIATE_COLUMNS) | {"market", "departure_class", "tour_type", "tour_id"}
    for col in df.columns:
        if col in categorical:
            df[col] = df[col].astype(str)
    return df


def save_feature_config(config: FeatureConfig, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(config.to_json_dict(), indent=2, sort_keys=True))
    return path
