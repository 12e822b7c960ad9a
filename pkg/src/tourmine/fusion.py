"""Activity-type imputation for visited locations.

Stops reported at six-digit resolution draw an activity type directly
from the firm census (firm counts weighted by make/use probabilities of
the stop's commodity).  Four-digit stops are first assigned to one of
their six-digit child zones, weighted by observed shipment flows, and
then resolved the same way.  Stops without a usable commodity code fall
back to firm counts alone and are flagged low-confidence so downstream
model training can exclude them.

All draws come from a per-stop substream keyed by (seed, tour id, stop
index), so results are independent of processing order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import pandas as pd

from tourmine.seeding import choose_weighted, substream
from tourmine.types import Dataset, TourDataError, Zone

MAKE_USE_BY_KIND = {"pickup": "make", "delivery": "use"}
FLOW_BY_KIND = {"pickup": "out", "delivery": "in"}


class NoFirmDataError(TourDataError):
    """A visited zone has no firms of any activity type in the census."""


@dataclass
class FirmCensus:
    """Firm counts per (zone, activity) plus make/use probabilities."""

    counts: dict[tuple[str, str], int] = field(default_factory=dict)
    make_use: dict[tuple[str, str, str], float] = field(default_factory=dict)

    def __post_init__(self):
        for key, n in self.counts.items():
            if n < 0:
                raise ValueError(f"negative firm count for {key}")
        for key, p in self.make_use.items():
            if not 0 <= p <= 1:
                raise ValueError(f"make/use probability out of [0,1] for {key}")

    def activities_in(self, zone_id: str) -> dict[str, int]:
        return {
            activity: n
            for (zid, activity), n in self.counts.items()
            if zid == zone_id and n > 0
        }


@dataclass
class ShipmentFlowCounts:
    """Shipment counts per (commodity, pc6 zone, in/out direction)."""

    counts: dict[tuple[str, str, str], int] = field(default_factory=dict)

    def __post_init__(self):
        for key, n in self.counts.items():
            if n < 0:
                raise ValueError(f"negative flow count for {key}")

    def flow(self, commodity: str | None, zone_id: str, direction: str) -> int:
        if commodity is not None:
            return self.counts.get((commodity, zone_id, direction), 0)
        return sum(
            n
            for (_, zid, d), n in self.counts.items()
            if zid == zone_id and d == direction
        )


def activity_probability(
    zone_id: str,
    commodity: str | None,
    direction: str,
    census: FirmCensus,
) -> dict[str, float]:
    """Distribution over activity types for a shipment at this zone.

    With a commodity, firm counts are weighted by the make (loading) or
    use (unloading) probability of that commodity; without one the
    distribution is proportional to firm counts alone.  If the weighted
    terms all vanish the count-proportional fallback applies as well.
    """
    if direction not in ("make", "use"):
        raise ValueError(f"direction must be make or use, got {direction!r}")
    firms = census.activities_in(zone_id)
    if not firms:
        raise NoFirmDataError(f"zone {zone_id}: no firms of any activity type")
    activities = sorted(firms)
    if commodity is not None:
        weights = [
            firms[a] * census.make_use.get((a, commodity, direction), 0.0)
            for a in activities
        ]
        if sum(weights) == 0:
            weights = [float(firms[a]) for a in activities]
    else:
        weights = [float(firms[a]) for a in activities]
    total = float(sum(weights))
    return {a: w / total for a, w in zip(activities, weights)}


def pc6_weights(
    zone: Zone,
    commodity: str | None,
    direction: str,
    flows: ShipmentFlowCounts,
) -> dict[str, float]:
    """Distribution over a four-digit zone's child zones by shipment flow.

    Children with zero flow get zero weight unless every child has zero
    flow, in which case the distribution is uniform.
    """
    if direction not in ("in", "out"):
        raise ValueError(f"direction must be in or out, got {direction!r}")
    children = list(zone.pc6_children)
    if not children:
        raise TourDataError(f"zone {zone.zone_id}: no pc6 children")
    raw = [float(flows.flow(commodity, child, direction)) for child in children]
    total = sum(raw)
    if total == 0:
        return {child: 1.0 / len(children) for child in children}
    return {child: w / total for child, w in zip(children, raw)}


@dataclass
class ImputationLogEntry:
    tour_id: str
    stop_index: int
    zone_id: str
    sampled_pc6: str | None
    probabilities: dict[str, float]
    activity_type: str
    low_confidence: bool

    def to_json_dict(self) -> dict:
        return {
            "tour_id": self.tour_id,
            "stop_index": self.stop_index,
            "zone_id": self.zone_id,
            "sampled_pc6": self.sampled_pc6,
            "probabilities": self.probabilities,
            "activity_type": self.activity_type,
            "low_confidence": self.low_confidence,
        }


def _stop_commodity(tour, stop, shipments) -> str | None:
    """Commodity associated with a stop.

    Prefers the first shipment loaded (pickup) or unloaded (delivery) at
    the stop's zone; stops matching no shipment zone fall back to the
    tour's first coded shipment.  None (low confidence) only when the
    relevant records carry no commodity code at all.
    """
    attr = "load_zone" if stop.kind == "pickup" else "unload_zone"
    for shipment in shipments:
        if getattr(shipment, attr) == stop.zone_id:
            return shipment.commodity_code
    for shipment in shipments:
        if shipment.commodity_code is not None:
            return shipment.commodity_code
    return None


def impute_activities(
    dataset: Dataset,
    census: FirmCensus,
    flows: ShipmentFlowCounts,
    seed: int,
) -> tuple[Dataset, list[ImputationLogEntry]]:
    """New dataset with every stop's activity type resolved, plus a log.

    Identical seed gives identical output regardless of evaluation order.
    Errors from the underlying probability computations are re-raised
    tagged with the offending tour and stop.
    """
    shipments_by_tour: dict[str, list] = {}
    for s in dataset.shipments:
        shipments_by_tour.setdefault(s.tour_id, []).append(s)

    new_tours = []
    log: list[ImputationLogEntry] = []
    for tour in dataset.tours:
        shipments = shipments_by_tour.get(tour.tour_id, [])
        new_stops = []
        for i, stop in enumerate(tour.stops):
            if stop.activity_type != "unknown":
                new_stops.append(stop)
                continue
            rng = substream(seed, "fusion", tour.tour_id, i)
            commodity = _stop_commodity(tour, stop, shipments)
            low_confidence = commodity is None
            try:
                sampled_pc6 = None
                target_zone = stop.zone_id
                if stop.resolution == "pc4":
                    zone = dataset.zones[stop.zone_id]
                    weights = pc6_weights(zone, commodity, FLOW_BY_KIND[stop.kind], flows)
                    children = sorted(weights)
                    sampled_pc6 = choose_weighted(rng, children, [weights[c] for c in children])
                    target_zone = sampled_pc6
                probs = activity_probability(
                    target_zone, commodity, MAKE_USE_BY_KIND[stop.kind], census
                )
            except TourDataError as exc:
                raise TourDataError(
                    f"tour {tour.tour_id} stop {i} (zone {stop.zone_id}): {exc}"
                ) from exc
            activities = sorted(probs)
            activity = choose_weighted(rng, activities, [probs[a] for a in activities])
            new_stops.append(replace(stop, activity_type=activity, low_confidence=low_confidence))
            log.append(
                ImputationLogEntry(
                    tour.tour_id, i, stop.zone_id, sampled_pc6, probs, activity, low_confidence
                )
            )
        new_tours.append(replace(tour, stops=tuple(new_stops)))
    return dataset.with_tours(new_tours), log


# ---------------------------------------------------------------------------
# file formats


def load_firm_census(firms_path, make_use_path) -> FirmCensus:
    firms = pd.read_csv(firms_path, dtype=str, keep_default_na=False)
    make_use = pd.read_csv(make_use_path, dtype=str, keep_default_na=False)
    counts = {
        (row["zone_id"], row["activity_type"]): int(row["count"])
        for _, row in firms.iterrows()
    }
    probs = {
        (row["activity_type"], row["commodity_code"], row["direction"]): float(row["probability"])
        for _, row in make_use.iterrows()
    }
    return FirmCensus(counts, probs)


def save_firm_census(census: FirmCensus, firms_path, make_use_path) -> None:
    pd.DataFrame(
        [
            {"zone_id": z, "activity_type": a, "count": n}
            for (z, a), n in sorted(census.counts.items())
        ],
        columns=["zone_id", "activity_type", "count"],
    ).to_csv(firms_path, index=False)
    pd.DataFrame(
        [
            {"activity_type": a, "commodity_code": c, "direction": d, "probability": p}
            for (a, c, d), p in sorted(census.make_use.items())
        ],
        columns=["activity_type", "commodity_code", "direction", "probability"],
    ).to_csv(make_use_path, index=False)


def load_flows(path) -> ShipmentFlowCounts:
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    counts = {
        (row["commodity_code"], row["pc6_zone"], row["direction"]): int(row["count"])
        for _, row in df.iterrows()
    }
    return ShipmentFlowCounts(counts)


def save_flows(flows: ShipmentFlowCounts, path) -> None:
    pd.DataFrame(
        [
            {"commodity_code": c, "pc6_zone": z, "direction": d, "count": n}
            for (c, z, d), n in sorted(flows.counts.items())
        ],
        columns=["commodity_code", "pc6_zone", "direction", "count"],
    ).to_csv(path, index=False)


def save_imputation_log(entries: list[ImputationLogEntry], path) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        for entry in entries:
            fh.write(json.dumps(entry.to_json_dict(), sort_keys=True) + "\n")
    return path
