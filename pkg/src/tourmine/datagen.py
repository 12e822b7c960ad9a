"""Synthetic scenario generation with planted, recoverable structure.

Two levels of generation:

* :func:`generate_matrix` draws feature/target rows straight from a
  planted decision tree (plus optional class/numeric noise) — the ground
  truth for tree-recovery and cross-validation tests.
* :func:`generate` builds a full raw scenario (zones, census, flows,
  speed series, tours, shipments) engineered so that running the real
  pipeline reproduces the planted attribute values: zones host a single
  activity type each, planted-congested zones dip below the speed
  threshold in every daypart, and zone centroids are spaced so proximity
  expansion adds nothing.

The sidecar ground-truth record stores everything acceptance tests need
(planted tree, rule probabilities, per-zone congestion status, expected
class shares and the noise-implied probability-matching bound).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from tourmine.congestion import SpeedSeries, save_speed_series
from tourmine.fusion import FirmCensus, ShipmentFlowCounts, save_firm_census, save_flows
from tourmine.io import save_dataset
from tourmine.rulemine import save_transactions
from tourmine.seeding import choose_weighted, substream
from tourmine.types import (
    Dataset,
    ShipmentRecord,
    StopRecord,
    TourRecord,
    validate_dataset,
)

TOUR_CLASSES = ("direct", "collection", "distribution")


@dataclass
class RulePlant:
    """One planted co-occurrence: antecedent drawn with p_base, then the
    consequent joins with the given confidence."""

    antecedent: tuple[str, ...]
    consequent: tuple[str, ...]
    p_base: float
    confidence: float


@dataclass
class GeneratorSpec:
    seed: int = 0
    n_tours: int = 1000
    classes: tuple[str, ...] = TOUR_CLASSES
    #: attribute name -> {level: probability}
    attributes: dict[str, dict[str, float]] = field(default_factory=dict)
    #: nested {"attribute": ..., "children": {level: node}} with
    #: {"class": ..., "numeric_mean": ...} leaves
    planted_tree: dict = field(default_factory=dict)
    class_noise: float = 0.0
    numeric_noise_var: float = 0.0
    rules: list[RulePlant] = field(default_factory=list)
    noise_items: dict[str, float] = field(default_factory=dict)
    #: shipment-count range per n_commodities category level
    fns_ranges: dict[str, tuple[int, int]] = field(
        default_factory=lambda: {"fns_1": (1, 2), "fns_2": (3, 7), "fns_3": (8, 10)}
    )
    n_plain_zones: int = 4
    n_congested_zones: int = 2
    zone_spacing_m: float = 15000.0
    free_flow_kmh: float = 100.0
    congested_kmh: float = 25.0
    speed_step_minutes: int = 15
    #: dayparts whose speed window dips in planted-congested zones; the
    #: default (all four) makes congestion flags independent of arrival time
    congested_periods: tuple[str, ...] = ("morning", "midday", "afternoon", "rest")

    def validate(self) -> None:
        if not 0 <= self.class_noise < 1:
            raise ValueError("class_noise must be in [0, 1)")
        if self.numeric_noise_var < 0:
            raise ValueError("numeric_noise_var must be non-negative")
        if not self.attributes:
            raise ValueError("spec declares no attributes")
        for name, probs in self.attributes.items():
            if not probs:
                raise ValueError(f"attribute {name}: no levels")
            if abs(sum(probs.values()) - 1.0) > 1e-9:
                raise ValueError(f"attribute {name}: level probabilities must sum to 1")
        if self.planted_tree:
            self._validate_tree(self.planted_tree)
        for rule in self.rules:
            if not 0 <= rule.p_base <= 1 or not 0 <= rule.confidence <= 1:
                raise ValueError("rule probabilities must be in [0, 1]")

    def _validate_tree(self, node: dict) -> None:
        if "class" in node:
            if node["class"] not in self.classes:
                raise ValueError(f"planted leaf class {node['class']!r} not declared")
            if node["numeric_mean"] < 1:
                raise ValueError("planted numeric means must be >= 1")
            return
        attr = node.get("attribute")
        if attr not in self.attributes:
            raise ValueError(f"planted tree references undeclared attribute {attr!r}")
        levels = set(self.attributes[attr])
        children = node.get("children", {})
        if set(children) != levels:
            raise ValueError(
                f"planted tree at {attr!r}: children {sorted(children)} do not cover levels {sorted(levels)}"
            )
        for child in children.values():
            self._validate_tree(child)


def default_spec(seed: int = 0, n_tours: int = 1000, class_noise: float = 0.0,
                 numeric_noise_var: float = 0.0) -> GeneratorSpec:
    """Depth-2 planted scenario whose structure the tree provably recovers."""
    return GeneratorSpec(
        seed=seed,
        n_tours=n_tours,
        class_noise=class_noise,
        numeric_noise_var=numeric_noise_var,
        attributes={
            "vehicle_type": {"truck": 0.5, "trailer": 0.5},
            "first_stop_congested": {"0": 0.5, "1": 0.5},
            "day_of_week": {str(d): 1.0 / 7.0 for d in range(7)},
            "n_commodities_cat": {"fns_2": 0.6, "fns_3": 0.4},
            "empty_any": {"0": 0.7, "1": 0.3},
            "visit_dc": {"0": 0.8, "1": 0.2},
            "visit_tt": {"0": 0.85, "1": 0.15},
            "later_stop_congested": {"0": 0.7, "1": 0.3},
        },
        # both depth-2 branches separate the class AND the stop count, so
        # the structure stays recoverable under moderate label noise
        planted_tree={
            "attribute": "vehicle_type",
            "children": {
                "truck": {
                    "attribute": "first_stop_congested",
                    "children": {
                        "0": {"class": "direct", "numeric_mean": 2},
                        "1": {"class": "collection", "numeric_mean": 6},
                    },
                },
                "trailer": {
                    "attribute": "first_stop_congested",
                    "children": {
                        "0": {"class": "distribution", "numeric_mean": 10},
                        "1": {"class": "collection", "numeric_mean": 14},
                    },
                },
            },
        },
        rules=[
            RulePlant(("agri",), ("food",), 0.5, 0.85),
            RulePlant(("chem",), ("pharma",), 0.3, 0.75),
        ],
        noise_items={"parcel": 0.4, "metal": 0.25, "wood": 0.15},
    )


def decide_planted(tree: dict, row: dict[str, str]) -> tuple[str, float]:
    node = tree
    while "class" not in node:
        node = node["children"][row[node["attribute"]]]
    return node["class"], float(node["numeric_mean"])


def planted_class_probs(spec: GeneratorSpec) -> dict[str, float]:
    """Exact class shares implied by the planted tree plus class noise."""
    acc = {c: 0.0 for c in spec.classes}

    def walk(node: dict, mass: float) -> None:
        if "class" in node:
            acc[node["class"]] += mass
            return
        probs = spec.attributes[node["attribute"]]
        for level, child in node["children"].items():
            walk(child, mass * probs[level])

    walk(spec.planted_tree, 1.0)
    eps, m = spec.class_noise, len(spec.classes)
    if eps == 0 or m < 2:
        return acc
    return {
        c: (1 - eps) * acc[c] + eps * (1.0 - acc[c]) / (m - 1)
        for c in spec.classes
    }


def expected_rho_bound(spec: GeneratorSpec) -> float:
    """Probability-matching score of a tree that recovers the planted leaves."""
    eps, m = spec.class_noise, len(spec.classes)
    return (1 - eps) ** 2 + (eps**2 / (m - 1) if m > 1 else 0.0)


def _sample_row(spec: GeneratorSpec, rng: np.random.Generator) -> dict[str, str]:
    row = {}
    for name in sorted(spec.attributes):
        levels = sorted(spec.attributes[name])
        row[name] = choose_weighted(rng, levels, [spec.attributes[name][l] for l in levels])
    return row


def _apply_noise(
    spec: GeneratorSpec, rng: np.random.Generator, label: str, mean: float
) -> tuple[str, float]:
    if spec.class_noise > 0 and rng.random() < spec.class_noise:
        others = [c for c in spec.classes if c != label]
        label = others[int(rng.integers(len(others)))]
    value = mean
    if spec.numeric_noise_var > 0:
        value = mean + rng.normal(0.0, math.sqrt(spec.numeric_noise_var))
    return label, value


def generate_matrix(spec: GeneratorSpec):
    """(X, y, truth) drawn directly from the planted tree."""
    spec.validate()
    if not spec.planted_tree:
        raise ValueError("generate_matrix requires a planted tree")
    rng = substream(spec.seed, "matrix")
    rows, labels, numerics, true_classes = [], [], [], []
    for _ in range(spec.n_tours):
        row = _sample_row(spec, rng)
        label, mean = decide_planted(spec.planted_tree, row)
        true_classes.append(label)
        label, value = _apply_noise(spec, rng, label, mean)
        rows.append(row)
        labels.append(label)
        numerics.append(max(1, int(np.rint(value))))
    X = pd.DataFrame(rows, columns=sorted(spec.attributes))
    y = np.column_stack([np.asarray(labels, dtype=object), np.asarray(numerics, dtype=object)])
    truth = {
        "planted_tree": spec.planted_tree,
        "true_classes": true_classes,
        "expected_rho": expected_rho_bound(spec),
        "expected_class_probs": planted_class_probs(spec),
    }
    return X, y, truth


def sample_itemset(rng: np.random.Generator, spec: GeneratorSpec) -> list[str]:
    """One tour's commodity item set under the planted co-occurrence model."""
    items: set[str] = set()
    for rule in spec.rules:
        if rng.random() < rule.p_base:
            items.update(rule.antecedent)
            if rng.random() < rule.confidence:
                items.update(rule.consequent)
    for item in sorted(spec.noise_items):
        if rng.random() < spec.noise_items[item]:
            items.add(item)
    if not items:
        pool = sorted(spec.noise_items) or ["misc"]
        items.add(pool[int(rng.integers(len(pool)))])
    return sorted(items)


@dataclass
class ZonePlan:
    zone_id: str
    pc4: str
    centroid: tuple[float, float]
    group: str  # depot | plain | congested | dc | tt
    children: tuple[str, ...]


@dataclass
class ScenarioBundle:
    dataset: Dataset
    census: FirmCensus
    flows: ShipmentFlowCounts
    speed_series: list[SpeedSeries]
    transactions: dict[str, set[str]]
    ground_truth: dict

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = save_dataset(self.dataset, out)
        save_firm_census(self.census, out / "firms.csv", out / "make_use.csv")
        save_flows(self.flows, out / "flows.csv")
        save_speed_series(self.speed_series, out / "speeds.csv")
        save_transactions(self.transactions, out / "transactions.csv")
        (out / "ground_truth.json").write_text(
            json.dumps(self.ground_truth, indent=2, sort_keys=True)
        )
        paths.update(
            {
                "firms": out / "firms.csv",
                "make_use": out / "make_use.csv",
                "flows": out / "flows.csv",
                "speeds": out / "speeds.csv",
                "transactions": out / "transactions.csv",
                "ground_truth": out / "ground_truth.json",
            }
        )
        return paths


_GROUP_ACTIVITY = {
    "depot": "producer_consumer",
    "plain": "producer_consumer",
    "congested": "producer_consumer",
    "dc": "DC",
    "tt": "TT",
}


def _plan_zones(spec: GeneratorSpec) -> list[ZonePlan]:
    groups = (
        ["depot"]
        + ["plain"] * spec.n_plain_zones
        + ["congested"] * spec.n_congested_zones
        + ["dc", "tt"]
    )
    plans = []
    cols = max(3, int(math.ceil(math.sqrt(len(groups)))))
    for idx, group in enumerate(groups):
        pc4 = f"{1000 + idx}"
        x = (idx % cols) * spec.zone_spacing_m
        y = (idx // cols) * spec.zone_spacing_m
        children = (f"{pc4}01", f"{pc4}02")
        plans.append(ZonePlan(f"Z{idx:02d}", pc4, (x, y), group, children))
    return plans


def _build_speed_series(spec: GeneratorSpec, plans: list[ZonePlan]) -> list[SpeedSeries]:
    from tourmine.congestion import period_of_minute

    steps = (24 * 60) // spec.speed_step_minutes
    dipped = set(spec.congested_periods)
    out = []
    for plan in plans:
        if plan.group == "congested":
            speeds = []
            for step in range(steps):
                minute = step * spec.speed_step_minutes
                # pad the first step of every dip run so the forward
                # smoothing window cannot drag the dip into a clean period
                in_dip = (
                    period_of_minute(minute) in dipped
                    and period_of_minute(minute - spec.speed_step_minutes) in dipped
                )
                speeds.append(spec.congested_kmh if in_dip else spec.free_flow_kmh)
            speeds[0] = spec.free_flow_kmh  # free-flow reference sample
            speeds = tuple(speeds)
        else:
            speeds = (spec.free_flow_kmh,) * steps
        for k, length in enumerate((800.0, 1200.0)):
            out.append(
                SpeedSeries(
                    f"seg-{plan.zone_id}-{k}",
                    plan.zone_id,
                    length,
                    spec.speed_step_minutes,
                    speeds,
                )
            )
    return out


def _stop_kinds(label: str, n_stops: int) -> list[str]:
    if label == "direct":
        return ["pickup", "delivery"]
    if label == "collection":
        return ["pickup"] * (n_stops - 1) + ["delivery"]
    return ["pickup"] + ["delivery"] * (n_stops - 1)


def _realized_n_stops(label: str, value: float) -> int:
    if label == "direct":
        return 2
    return max(3, int(np.rint(value)))


def generate(spec: GeneratorSpec) -> ScenarioBundle:
    """Full raw scenario realizing the planted structure end to end."""
    spec.validate()
    if not spec.planted_tree:
        raise ValueError("generate requires a planted tree")
    for leaf_class, mean in _planted_leaves(spec.planted_tree):
        if leaf_class == "direct" and mean != 2:
            raise ValueError("direct leaves must plant numeric_mean = 2 (a direct tour has 2 stops)")
        if leaf_class != "direct" and mean < 3:
            raise ValueError("collection/distribution leaves must plant numeric_mean >= 3")

    plans = _plan_zones(spec)
    by_group: dict[str, list[ZonePlan]] = {}
    for plan in plans:
        by_group.setdefault(plan.group, []).append(plan)

    from tourmine.types import Zone

    zones: dict[str, Zone] = {}
    for plan in plans:
        zones[plan.zone_id] = Zone(plan.zone_id, plan.pc4, plan.centroid, plan.children)
        for k, child in enumerate(plan.children):
            offset = 200.0 * (k + 1)
            zones[child] = Zone(
                child, plan.pc4, (plan.centroid[0] + offset, plan.centroid[1] + offset), ()
            )

    items_universe = sorted(
        {i for r in spec.rules for i in r.antecedent + r.consequent} | set(spec.noise_items)
    ) or ["misc"]
    census_counts = {}
    make_use = {}
    flow_counts = {}
    for plan in plans:
        activity = _GROUP_ACTIVITY[plan.group]
        for k, child in enumerate(plan.children):
            census_counts[(child, activity)] = 3
            for item in items_universe:
                for direction in ("in", "out"):
                    flow_counts[(item, child, direction)] = 3 if k == 0 else 1
    for activity in set(_GROUP_ACTIVITY.values()):
        for item in items_universe:
            for direction in ("make", "use"):
                make_use[(activity, item, direction)] = 1.0
    census = FirmCensus(census_counts, make_use)
    flows = ShipmentFlowCounts(flow_counts)

    travel_times: dict[tuple[str, str], float] = {}
    pc4_ids = [plan.zone_id for plan in plans]
    for a in pc4_ids:
        for b in pc4_ids:
            dist_m = math.dist(zones[a].centroid, zones[b].centroid)
            travel_times[(a, b)] = 0.0 if a == b else round(dist_m / 1000.0, 3)

    depot = by_group["depot"][0]
    plain = by_group["plain"]
    congested = by_group["congested"]
    dc_zone = by_group["dc"][0]
    tt_zone = by_group["tt"][0]
    truth_congested = sorted(plan.zone_id for plan in congested)

    tours: list[TourRecord] = []
    shipments: list[ShipmentRecord] = []
    transactions: dict[str, set[str]] = {}
    tour_truth = []
    for i in range(spec.n_tours):
        rng = substream(spec.seed, "tours", i)
        tour_id = f"T{i:05d}"
        row = _sample_row(spec, rng)
        true_class, mean = decide_planted(spec.planted_tree, row)
        label, value = _apply_noise(spec, rng, true_class, mean)
        n_stops = _realized_n_stops(label, value)
        kinds = _stop_kinds(label, n_stops)

        if row.get("first_stop_congested") == "1":
            first_plan = congested[int(rng.integers(len(congested)))]
        else:
            first_plan = depot
        later_plans = [plain[int(rng.integers(len(plain)))] for _ in range(n_stops - 1)]
        specials = []
        if row.get("later_stop_congested") == "1":
            specials.append(congested[int(rng.integers(len(congested)))])
        if row.get("visit_dc") == "1":
            specials.append(dc_zone)
        if row.get("visit_tt") == "1":
            specials.append(tt_zone)
        for slot, plan in enumerate(specials):
            if slot < len(later_plans):
                later_plans[slot] = plan
        stop_plans = [first_plan] + later_plans
        stops = tuple(
            StopRecord.create(plan.zone_id, plan.pc4, kind)
            for plan, kind in zip(stop_plans, kinds)
        )
        # a short tour may not have room for every requested special stop;
        # record what was actually realized
        realized = dict(row)
        if "visit_dc" in realized:
            realized["visit_dc"] = "1" if any(p.group == "dc" for p in stop_plans) else "0"
        if "visit_tt" in realized:
            realized["visit_tt"] = "1" if any(p.group == "tt" for p in stop_plans) else "0"
        if "later_stop_congested" in realized:
            realized["later_stop_congested"] = (
                "1" if any(p.group == "congested" for p in later_plans) else "0"
            )
        row = realized

        fns_level = row.get("n_commodities_cat")
        lo, hi = spec.fns_ranges.get(fns_level, (1, 3))
        n_ship = int(rng.integers(lo, hi + 1))
        itemset = sample_itemset(rng, spec)
        pickup_zones = [p.zone_id for p, k in zip(stop_plans, kinds) if k == "pickup"]
        delivery_zones = [p.zone_id for p, k in zip(stop_plans, kinds) if k == "delivery"]
        shipment_ids = []
        tour_items: set[str] = set()
        for k in range(n_ship):
            sid = f"S{i:05d}-{k}"
            empty = row.get("empty_any") == "1" and k == n_ship - 1
            item = itemset[k % len(itemset)]
            tour_items.add(item)
            shipments.append(
                ShipmentRecord(
                    sid,
                    tour_id,
                    item,
                    0.0 if empty else float(np.round(rng.uniform(500.0, 5000.0), 1)),
                    pickup_zones[k % len(pickup_zones)],
                    delivery_zones[k % len(delivery_zones)],
                    empty,
                )
            )
            shipment_ids.append(sid)

        tours.append(
            TourRecord(
                tour_id,
                f"C{int(rng.integers(5)):02d}",
                row.get("vehicle_type", "truck"),
                int(row.get("day_of_week", "0")),
                int(rng.integers(0, 1440)),
                stops,
                tuple(shipment_ids),
            )
        )
        transactions[tour_id] = tour_items
        tour_truth.append(
            {
                "tour_id": tour_id,
                "attributes": row,
                "true_class": true_class,
                "observed_class": label,
                "n_stops": n_stops,
            }
        )

    dataset = Dataset(tours, shipments, zones, travel_times)
    validate_dataset(dataset)
    ground_truth = {
        "seed": spec.seed,
        "n_tours": spec.n_tours,
        "classes": list(spec.classes),
        "class_noise": spec.class_noise,
        "numeric_noise_var": spec.numeric_noise_var,
        "planted_tree": spec.planted_tree,
        "attributes": {k: dict(v) for k, v in spec.attributes.items()},
        "congested_zones": truth_congested,
        "congested_periods": list(spec.congested_periods),
        "rules": [
            {
                "antecedent": list(r.antecedent),
                "consequent": list(r.consequent),
                "p_base": r.p_base,
                "confidence": r.confidence,
            }
            for r in spec.rules
        ],
        "expected_rho": expected_rho_bound(spec),
        "expected_class_probs": planted_class_probs(spec),
        "tours": tour_truth,
    }
    return ScenarioBundle(
        dataset, census, flows, _build_speed_series(spec, plans), transactions, ground_truth
    )


def _planted_leaves(node: dict):
    if "class" in node:
        yield node["class"], float(node["numeric_mean"])
        return
    for child in node["children"].values():
        yield from _planted_leaves(child)


def spec_from_config(config: dict, seed: int | None = None) -> GeneratorSpec:
    """Build a spec from a JSON config block (CLI surface)."""
    spec = default_spec(seed=seed if seed is not None else int(config.get("seed", 0)))
    for key in (
        "n_tours",
        "class_noise",
        "numeric_noise_var",
        "n_plain_zones",
        "n_congested_zones",
        "zone_spacing_m",
        "free_flow_kmh",
        "congested_kmh",
        "speed_step_minutes",
    ):
        if key in config:
            setattr(spec, key, type(getattr(spec, key))(config[key]))
    if "attributes" in config:
        spec.attributes = {
            str(k): {str(l): float(p) for l, p in v.items()}
            for k, v in config["attributes"].items()
        }
    if "planted_tree" in config:
        spec.planted_tree = config["planted_tree"]
    if "classes" in config:
        spec.classes = tuple(config["classes"])
    if "rules" in config:
        spec.rules = [
            RulePlant(
                tuple(r["antecedent"]),
                tuple(r["consequent"]),
                float(r["p_base"]),
                float(r["confidence"]),
            )
            for r in config["rules"]
        ]
    if "noise_items" in config:
        spec.noise_items = {str(k): float(v) for k, v in config["noise_items"].items()}
    if "congested_periods" in config:
        spec.congested_periods = tuple(config["congested_periods"])
    spec.validate()
    return spec
