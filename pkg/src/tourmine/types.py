"""Domain records for freight-tour analysis: tours, stops, shipments, zones.

All records are immutable; pipeline stages produce new values instead of
mutating loaded data, so a :class:`Dataset` can be shared freely between
workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

VEHICLE_TYPES = ("truck", "trailer")
STOP_KINDS = ("pickup", "delivery")
RESOLUTIONS = ("pc4", "pc6")
ACTIVITY_TYPES = ("DC", "TT", "producer_consumer")
UNKNOWN_ACTIVITY = "unknown"


class TourDataError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(TourDataError):
    """One or more rows failed validation.

    ``issues`` holds one human-readable message per problem, each naming
    the offending file and line where applicable.
    """

    def __init__(self, issues: list[str]):
        self.issues = list(issues)
        head = "\n".join(f"  - {msg}" for msg in self.issues[:50])
        more = "" if len(self.issues) <= 50 else f"\n  ... and {len(self.issues) - 50} more"
        super().__init__(f"{len(self.issues)} validation issue(s):\n{head}{more}")


def _resolution_for(postcode: str) -> str:
    if len(postcode) == 4:
        return "pc4"
    if len(postcode) == 6:
        return "pc6"
    raise ValueError(f"postcode must have 4 or 6 digits, got {postcode!r}")


@dataclass(frozen=True)
class StopRecord:
    """One visited location within a tour."""

    zone_id: str
    postcode: str
    kind: str
    resolution: str
    activity_type: str = UNKNOWN_ACTIVITY
    low_confidence: bool = False

    def __post_init__(self):
        if self.kind not in STOP_KINDS:
            raise ValueError(f"unknown stop kind {self.kind!r}")
        if self.resolution not in RESOLUTIONS:
            raise ValueError(f"unknown resolution {self.resolution!r}")
        if _resolution_for(self.postcode) != self.resolution:
            raise ValueError(
                f"resolution {self.resolution!r} inconsistent with postcode {self.postcode!r}"
            )
        if self.activity_type not in ACTIVITY_TYPES + (UNKNOWN_ACTIVITY,):
            raise ValueError(f"unknown activity type {self.activity_type!r}")

    @staticmethod
    def create(zone_id: str, postcode: str, kind: str, **kwargs) -> "StopRecord":
        """Build a stop, deriving the resolution from the postcode length."""
        return StopRecord(zone_id, postcode, kind, _resolution_for(postcode), **kwargs)


@dataclass(frozen=True)
class TourRecord:
    """One tour: an ordered sequence of stops served by one vehicle."""

    tour_id: str
    carrier_id: str
    vehicle_type: str
    day_of_week: int
    departure_minute: int
    stops: tuple[StopRecord, ...]
    shipment_ids: tuple[str, ...] = ()

    def __post_init__(self):
        if self.vehicle_type not in VEHICLE_TYPES:
            raise ValueError(f"unknown vehicle type {self.vehicle_type!r}")
        if not 0 <= self.day_of_week <= 6:
            raise ValueError(f"day_of_week out of range: {self.day_of_week}")
        if not 0 <= self.departure_minute < 1440:
            raise ValueError(f"departure_minute out of range: {self.departure_minute}")
        if not self.stops:
            raise ValueError("tour must have at least one stop")
        object.__setattr__(self, "stops", tuple(self.stops))
        object.__setattr__(self, "shipment_ids", tuple(self.shipment_ids))


@dataclass(frozen=True)
class ShipmentRecord:
    """One shipment moved within a tour."""

    shipment_id: str
    tour_id: str
    commodity_code: str | None
    weight_kg: float
    load_zone: str
    unload_zone: str
    empty_flag: bool = False

    def __post_init__(self):
        if self.weight_kg < 0:
            raise ValueError(f"weight_kg must be non-negative, got {self.weight_kg}")


@dataclass(frozen=True)
class Zone:
    """A postcode zone with a planar centroid in meters."""

    zone_id: str
    pc4: str
    centroid: tuple[float, float]
    pc6_children: tuple[str, ...] = ()

    def __post_init__(self):
        x, y = self.centroid
        if not (_is_finite(x) and _is_finite(y)):
            raise ValueError(f"zone {self.zone_id}: centroid must be finite")
        object.__setattr__(self, "centroid", (float(x), float(y)))
        object.__setattr__(self, "pc6_children", tuple(self.pc6_children))


def _is_finite(v: float) -> bool:
    return v == v and v not in (float("inf"), float("-inf"))


@dataclass
class Dataset:
    """Cross-referenced container of tours, shipments, zones and travel times.

    ``travel_times`` maps ``(from_zone, to_zone)`` to minutes; missing
    diagonal entries are treated as zero.
    """

    tours: list[TourRecord] = field(default_factory=list)
    shipments: list[ShipmentRecord] = field(default_factory=list)
    zones: dict[str, Zone] = field(default_factory=dict)
    travel_times: dict[tuple[str, str], float] = field(default_factory=dict)

    def shipments_of(self, tour_id: str) -> list[ShipmentRecord]:
        return [s for s in self.shipments if s.tour_id == tour_id]

    def travel_minutes(self, from_zone: str, to_zone: str) -> float:
        if from_zone == to_zone:
            return self.travel_times.get((from_zone, to_zone), 0.0)
        try:
            return self.travel_times[(from_zone, to_zone)]
        except KeyError:
            raise TourDataError(
                f"missing travel time for zone pair ({from_zone}, {to_zone})"
            ) from None

    def with_tours(self, tours: list[TourRecord]) -> "Dataset":
        return Dataset(list(tours), list(self.shipments), dict(self.zones), dict(self.travel_times))


def validate_dataset(ds: Dataset) -> None:
    """Check the cross-reference invariants; raise :class:`ValidationError` if broken."""
    issues: list[str] = []
    tour_ids = {t.tour_id for t in ds.tours}
    if len(tour_ids) != len(ds.tours):
        issues.append("duplicate tour ids")
    for t in ds.tours:
        for i, stop in enumerate(t.stops):
            if stop.zone_id not in ds.zones:
                issues.append(f"tour {t.tour_id} stop {i}: unknown zone {stop.zone_id!r}")
    shipment_ids = set()
    for s in ds.shipments:
        if s.shipment_id in shipment_ids:
            issues.append(f"duplicate shipment id {s.shipment_id!r}")
        shipment_ids.add(s.shipment_id)
        if s.tour_id not in tour_ids:
            issues.append(f"shipment {s.shipment_id}: unknown tour {s.tour_id!r}")
        for zone in (s.load_zone, s.unload_zone):
            if zone not in ds.zones:
                issues.append(f"shipment {s.shipment_id}: unknown zone {zone!r}")
    seen_children: set[str] = set()
    for z in ds.zones.values():
        for child in z.pc6_children:
            if child in seen_children:
                issues.append(f"pc6 child {child!r} assigned to more than one zone")
            seen_children.add(child)
    for (a, b), minutes in ds.travel_times.items():
        if a not in ds.zones or b not in ds.zones:
            issues.append(f"travel time references unknown zone pair ({a}, {b})")
        if minutes < 0:
            issues.append(f"negative travel time for ({a}, {b})")
        if a == b and minutes != 0:
            issues.append(f"nonzero diagonal travel time for zone {a}")
    if issues:
        raise ValidationError(issues)


__all__ = [
    "ACTIVITY_TYPES",
    "Dataset",
    "RESOLUTIONS",
    "STOP_KINDS",
    "ShipmentRecord",
    "StopRecord",
    "TourDataError",
    "TourRecord",
    "UNKNOWN_ACTIVITY",
    "VEHICLE_TYPES",
    "ValidationError",
    "Zone",
    "replace",
    "validate_dataset",
]
