"""Handwritten micro-dataset shared across tests."""

from __future__ import annotations

from tourmine.types import Dataset, ShipmentRecord, StopRecord, TourRecord, Zone


def zone(zone_id, pc4, x, y, children=()):
    return Zone(zone_id, pc4, (float(x), float(y)), tuple(children))


def tiny_dataset() -> Dataset:
    """Three tours over four pc4 zones (one with pc6 children)."""
    zones = {
        "A": zone("A", "1000", 0, 0, ("100001", "100002")),
        "100001": zone("100001", "1000", 100, 100),
        "100002": zone("100002", "1000", -100, -100),
        "B": zone("B", "2000", 10000, 0),
        "C": zone("C", "3000", 0, 10000),
        "D": zone("D", "4000", 10000, 10000),
    }
    tours = [
        TourRecord(
            "t1",
            "c1",
            "truck",
            0,
            400,
            (
                StopRecord.create("A", "1000", "pickup"),
                StopRecord.create("B", "2000", "delivery"),
            ),
            ("s1",),
        ),
        TourRecord(
            "t2",
            "c1",
            "trailer",
            2,
            700,
            (
                StopRecord.create("A", "1000", "pickup"),
                StopRecord.create("B", "2000", "delivery"),
                StopRecord.create("C", "3000", "delivery"),
                StopRecord.create("D", "4000", "delivery"),
            ),
            ("s2", "s3"),
        ),
        TourRecord(
            "t3",
            "c2",
            "truck",
            5,
            1000,
            (
                StopRecord.create("C", "3000", "pickup"),
                StopRecord.create("D", "4000", "pickup"),
                StopRecord.create("A", "1000", "delivery"),
            ),
            ("s4",),
        ),
    ]
    shipments = [
        ShipmentRecord("s1", "t1", "food", 1200.0, "A", "B", False),
        ShipmentRecord("s2", "t2", "chem", 800.0, "A", "B", False),
        ShipmentRecord("s3", "t2", "chem", 400.0, "A", "C", False),
        ShipmentRecord("s4", "t3", None, 0.0, "C", "A", True),
    ]
    travel = {}
    ids = list(zones)
    for a in ids:
        for b in ids:
            if a == b:
                travel[(a, b)] = 0.0
            else:
                ax, ay = zones[a].centroid
                bx, by = zones[b].centroid
                travel[(a, b)] = round(((ax - bx) ** 2 + (ay - by) ** 2) ** 0.5 / 1000.0, 3)
    return Dataset(tours, shipments, zones, travel)
