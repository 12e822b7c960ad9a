"""CSV ingest and export for the dataset container.

The only ingest format is comma-separated UTF-8 with a header row.  Rows
that fail validation are reported with their file and line number (line 1
is the header).  Commodity codes are opaque strings; when a code list is
supplied, unknown codes warn instead of failing.
"""

from __future__ import annotations

import warnings
from pathlib import Path

import pandas as pd

from tourmine.types import (
    Dataset,
    ShipmentRecord,
    StopRecord,
    TourRecord,
    ValidationError,
    Zone,
    validate_dataset,
)

TOURS_COLUMNS = ("tour_id", "carrier_id", "vehicle_type", "day_of_week", "departure_minute")
STOPS_COLUMNS = ("tour_id", "seq", "zone_id", "postcode", "kind")
STOPS_OPTIONAL = ("activity_type", "low_confidence")
SHIPMENTS_COLUMNS = (
    "shipment_id",
    "tour_id",
    "commodity_code",
    "weight_kg",
    "load_zone",
    "unload_zone",
    "empty_flag",
)
ZONES_COLUMNS = ("zone_id", "pc4", "x_m", "y_m", "pc6_children")
TRAVEL_COLUMNS = ("from_zone", "to_zone", "minutes")

FILE_NAMES = {
    "tours": "tours.csv",
    "stops": "stops.csv",
    "shipments": "shipments.csv",
    "zones": "zones.csv",
    "travel_times": "travel_times.csv",
}

_SCHEMAS = {
    "tours": (TOURS_COLUMNS, ()),
    "stops": (STOPS_COLUMNS, STOPS_OPTIONAL),
    "shipments": (SHIPMENTS_COLUMNS, ()),
    "zones": (ZONES_COLUMNS, ()),
    "travel_times": (TRAVEL_COLUMNS, ()),
}


def _resolve_paths(paths) -> dict[str, Path]:
    if isinstance(paths, (str, Path)):
        base = Path(paths)
        return {key: base / name for key, name in FILE_NAMES.items()}
    return {key: Path(p) for key, p in paths.items()}


def _read_table(path: Path, name: str, schema) -> pd.DataFrame:
    if not path.exists():
        raise ValidationError([f"{name}: missing file {path}"])
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    required, optional = schema
    missing = [c for c in required if c not in df.columns]
    unknown = [c for c in df.columns if c not in required and c not in optional]
    issues = []
    if missing:
        issues.append(f"{name}: missing column(s) {missing} in {path}")
    if unknown:
        issues.append(f"{name}: unknown column(s) {unknown} in {path}")
    if issues:
        raise ValidationError(issues)
    return df


class _RowErrors:
    """Accumulates row-level problems so one load reports them all."""

    def __init__(self):
        self.issues: list[str] = []

    def add(self, file: str, index: int, message: str) -> None:
        # +2: header is line 1, pandas index is 0-based.
        self.issues.append(f"{file} line {index + 2}: {message}")

    def raise_if_any(self) -> None:
        if self.issues:
            raise ValidationError(self.issues)


def load_dataset(paths, schema: dict | None = None, commodity_codes=None) -> Dataset:
    """Load and cross-validate a dataset.

    ``paths`` is either a directory containing the five standard CSV files
    or a mapping with keys ``tours``, ``stops``, ``shipments``, ``zones``
    and ``travel_times``.  ``schema`` may override the expected column
    sets per file (``{name: (required, optional)}``).  ``commodity_codes``
    is an optional declared code list; shipment codes outside it warn.
    """
    files = _resolve_paths(paths)
    schemas = dict(_SCHEMAS)
    if schema:
        schemas.update(schema)
    frames = {name: _read_table(files[name], name, schemas[name]) for name in FILE_NAMES}
    errors = _RowErrors()

    zones: dict[str, Zone] = {}
    for idx, row in frames["zones"].iterrows():
        try:
            children = tuple(c for c in row["pc6_children"].split(";") if c)
            zone = Zone(row["zone_id"], row["pc4"], (float(row["x_m"]), float(row["y_m"])), children)
            if zone.zone_id in zones:
                errors.add("zones.csv", idx, f"duplicate zone id {zone.zone_id!r}")
            zones[zone.zone_id] = zone
        except (ValueError, TypeError) as exc:
            errors.add("zones.csv", idx, str(exc))

    stops_by_tour: dict[str, list[tuple[int, StopRecord]]] = {}
    for idx, row in frames["stops"].iterrows():
        try:
            seq = int(row["seq"])
            stop = StopRecord.create(
                row["zone_id"],
                row["postcode"],
                row["kind"],
                activity_type=row.get("activity_type", "unknown") or "unknown",
                low_confidence=_parse_bool(row.get("low_confidence", "0")),
            )
            if stop.zone_id not in zones:
                errors.add("stops.csv", idx, f"unknown zone {stop.zone_id!r}")
            stops_by_tour.setdefault(row["tour_id"], []).append((seq, stop))
        except (ValueError, TypeError) as exc:
            errors.add("stops.csv", idx, str(exc))
    for tour_id, entries in stops_by_tour.items():
        seqs = [seq for seq, _ in entries]
        if any(b <= a for a, b in zip(seqs, seqs[1:])):
            errors.add("stops.csv", -1, f"tour {tour_id}: stop seq not strictly increasing")

    shipments: list[ShipmentRecord] = []
    shipment_ids_by_tour: dict[str, list[str]] = {}
    for idx, row in frames["shipments"].iterrows():
        try:
            shipment = ShipmentRecord(
                row["shipment_id"],
                row["tour_id"],
                row["commodity_code"] or None,
                float(row["weight_kg"]),
                row["load_zone"],
                row["unload_zone"],
                _parse_bool(row["empty_flag"]),
            )
            for zone in (shipment.load_zone, shipment.unload_zone):
                if zone not in zones:
                    errors.add("shipments.csv", idx, f"unknown zone {zone!r}")
            shipments.append(shipment)
            shipment_ids_by_tour.setdefault(shipment.tour_id, []).append(shipment.shipment_id)
        except (ValueError, TypeError) as exc:
            errors.add("shipments.csv", idx, str(exc))

    tours: list[TourRecord] = []
    tour_ids: set[str] = set()
    for idx, row in frames["tours"].iterrows():
        tour_id = row["tour_id"]
        try:
            entries = sorted(stops_by_tour.get(tour_id, []), key=lambda e: e[0])
            tour = TourRecord(
                tour_id,
                row["carrier_id"],
                row["vehicle_type"],
                int(row["day_of_week"]),
                int(row["departure_minute"]),
                tuple(stop for _, stop in entries),
                tuple(shipment_ids_by_tour.get(tour_id, ())),
            )
            tours.append(tour)
            tour_ids.add(tour_id)
        except (ValueError, TypeError) as exc:
            errors.add("tours.csv", idx, str(exc))
    for tour_id in stops_by_tour:
        if tour_id not in tour_ids:
            errors.add("stops.csv", -1, f"stops reference unknown tour {tour_id!r}")
    for idx, row in frames["shipments"].iterrows():
        if row["tour_id"] not in tour_ids:
            errors.add("shipments.csv", idx, f"unknown tour {row['tour_id']!r}")

    travel_times: dict[tuple[str, str], float] = {}
    for idx, row in frames["travel_times"].iterrows():
        try:
            minutes = float(row["minutes"])
            key = (row["from_zone"], row["to_zone"])
            if key[0] not in zones or key[1] not in zones:
                errors.add("travel_times.csv", idx, f"unknown zone pair {key}")
            if minutes < 0:
                errors.add("travel_times.csv", idx, f"negative travel time {minutes}")
            if key[0] == key[1] and minutes != 0:
                errors.add("travel_times.csv", idx, f"nonzero diagonal entry for {key[0]!r}")
            travel_times[key] = minutes
        except (ValueError, TypeError) as exc:
            errors.add("travel_times.csv", idx, str(exc))

    errors.raise_if_any()
    if commodity_codes is not None:
        declared = {str(c) for c in commodity_codes}
        unknown = sorted(
            {s.commodity_code for s in shipments if s.commodity_code is not None} - declared
        )
        if unknown:
            warnings.warn(
                f"shipments.csv: {len(unknown)} commodity code(s) outside the declared "
                f"list: {unknown[:10]}",
                stacklevel=2,
            )
    ds = Dataset(tours, shipments, zones, travel_times)
    validate_dataset(ds)
    return ds


def _parse_bool(raw: str) -> bool:
    value = str(raw).strip().lower()
    if value in ("1", "true"):
        return True
    if value in ("0", "false", ""):
        return False
    raise ValueError(f"expected boolean 0/1, got {raw!r}")


def save_dataset(ds: Dataset, out_dir) -> dict[str, Path]:
    """Write the five standard CSV files; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {key: out / name for key, name in FILE_NAMES.items()}

    pd.DataFrame(
        [
            {
                "tour_id": t.tour_id,
                "carrier_id": t.carrier_id,
                "vehicle_type": t.vehicle_type,
                "day_of_week": t.day_of_week,
                "departure_minute": t.departure_minute,
            }
            for t in ds.tours
        ],
        columns=list(TOURS_COLUMNS),
    ).to_csv(paths["tours"], index=False)

    save_stops(ds.tours, paths["stops"])

    pd.DataFrame(
        [
            {
                "shipment_id": s.shipment_id,
                "tour_id": s.tour_id,
                "commodity_code": s.commodity_code or "",
                "weight_kg": s.weight_kg,
                "load_zone": s.load_zone,
                "unload_zone": s.unload_zone,
                "empty_flag": int(s.empty_flag),
            }
            for s in ds.shipments
        ],
        columns=list(SHIPMENTS_COLUMNS),
    ).to_csv(paths["shipments"], index=False)

    pd.DataFrame(
        [
            {
                "zone_id": z.zone_id,
                "pc4": z.pc4,
                "x_m": z.centroid[0],
                "y_m": z.centroid[1],
                "pc6_children": ";".join(z.pc6_children),
            }
            for z in ds.zones.values()
        ],
        columns=list(ZONES_COLUMNS),
    ).to_csv(paths["zones"], index=False)

    pd.DataFrame(
        [
            {"from_zone": a, "to_zone": b, "minutes": minutes}
            for (a, b), minutes in ds.travel_times.items()
        ],
        columns=list(TRAVEL_COLUMNS),
    ).to_csv(paths["travel_times"], index=False)

    return paths


def save_stops(tours: list[TourRecord], path) -> Path:
    """Write a stops table (used both at synth time and after imputation)."""
    path = Path(path)
    rows = []
    for t in tours:
        for seq, stop in enumerate(t.stops):
            rows.append(
                {
                    "tour_id": t.tour_id,
                    "seq": seq,
                    "zone_id": stop.zone_id,
                    "postcode": stop.postcode,
                    "kind": stop.kind,
                    "activity_type": stop.activity_type,
                    "low_confidence": int(stop.low_confidence),
                }
            )
    pd.DataFrame(rows, columns=list(STOPS_COLUMNS) + list(STOPS_OPTIONAL)).to_csv(path, index=False)
    return path
