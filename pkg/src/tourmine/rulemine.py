"""Association-rule mining over per-tour commodity pickups.

Level-wise frequent-itemset search with downward-closure pruning, then
rule generation from every non-empty proper antecedent subset.  Strong
rules (confidence above a floor) connect commodities into market
segments via connected components.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import pandas as pd

from tourmine.types import TourDataError


@dataclass(frozen=True)
class Rule:
    antecedent: tuple[str, ...]
    consequent: tuple[str, ...]
    support: float
    confidence: float
    lift: float

    def key(self) -> tuple[tuple[str, ...], tuple[str, ...]]:
        return (self.antecedent, self.consequent)

    def to_json_dict(self) -> dict:
        return {
            "antecedent": list(self.antecedent),
            "consequent": list(self.consequent),
            "support": self.support,
            "confidence": self.confidence,
            "lift": self.lift,
        }


@dataclass
class RuleSet:
    rules: list[Rule]
    n_transactions: int
    min_support: float
    min_confidence: float
    min_rule_size: int

    def to_json_dict(self) -> dict:
        return {
            "n_transactions": self.n_transactions,
            "min_support": self.min_support,
            "min_confidence": self.min_confidence,
            "min_rule_size": self.min_rule_size,
            "rules": [r.to_json_dict() for r in self.rules],
        }


@dataclass(frozen=True)
class MarketSegment:
    label: str
    items: tuple[str, ...]


def _as_itemsets(transactions) -> list[frozenset[str]]:
    sets = [frozenset(str(i) for i in t) for t in transactions]
    if not sets:
        raise TourDataError("empty transaction list")
    if any(len(s) == 0 for s in sets):
        raise TourDataError("transactions must contain at least one item")
    return sets


def rule_stats(antecedent, consequent, transactions) -> tuple[float, float, float]:
    """(support, confidence, lift) of A -> B over the transactions."""
    a = frozenset(str(i) for i in antecedent)
    b = frozenset(str(i) for i in consequent)
    if not a or not b:
        raise ValueError("antecedent and consequent must be non-empty")
    if a & b:
        raise ValueError("antecedent and consequent must be disjoint")
    sets = _as_itemsets(transactions)
    n = len(sets)
    union = a | b
    n_union = sum(1 for t in sets if union <= t)
    n_a = sum(1 for t in sets if a <= t)
    n_b = sum(1 for t in sets if b <= t)
    support = n_union / n
    if n_a == 0:
        raise TourDataError("confidence undefined: antecedent never occurs")
    confidence = n_union / n_a
    if n_b == 0:
        raise TourDataError("lift undefined: consequent never occurs")
    lift = support / ((n_a / n) * (n_b / n))
    return support, confidence, lift


def _frequent_itemsets(sets: list[frozenset[str]], min_count: int) -> dict[tuple[str, ...], int]:
    """All itemsets with count >= min_count, found level-wise."""
    counts: dict[str, int] = {}
    for t in sets:
        for item in t:
            counts[item] = counts.get(item, 0) + 1
    frequent: dict[tuple[str, ...], int] = {
        (item,): c for item, c in counts.items() if c >= min_count
    }
    current = sorted(k for k in frequent)
    k = 1
    while current:
        current_set = set(current)
        candidates = []
        for i, left in enumerate(current):
            for right in current[i + 1 :]:
                if left[:-1] != right[:-1]:
                    break  # prefix join over lexicographically sorted tuples
                cand = left + (right[-1],)
                # downward closure: every k-subset must be frequent
                if all(sub in current_set for sub in combinations(cand, k)):
                    candidates.append(cand)
        next_level = []
        for cand in candidates:
            cand_set = frozenset(cand)
            count = sum(1 for t in sets if cand_set <= t)
            if count >= min_count:
                frequent[cand] = count
                next_level.append(cand)
        current = sorted(next_level)
        k += 1
    return frequent


def apriori(
    transactions,
    min_support: float,
    min_confidence: float,
    min_rule_size: int = 2,
) -> RuleSet:
    """Exactly the rules meeting the support, confidence and size thresholds."""
    if not 0 < min_support <= 1 or not 0 < min_confidence <= 1:
        raise ValueError("min_support and min_confidence must be in (0, 1]")
    if min_rule_size < 2:
        raise ValueError("min_rule_size must be >= 2")
    sets = _as_itemsets(transactions)
    n = len(sets)
    # smallest count whose support passes the float comparison support >= min_support
    min_count = next(c for c in range(1, n + 1) if c / n >= min_support)
    frequent = _frequent_itemsets(sets, min_count)

    rules: list[Rule] = []
    for itemset, count in frequent.items():
        if len(itemset) < min_rule_size:
            continue
        support = count / n
        for size in range(1, len(itemset)):
            for antecedent in combinations(itemset, size):
                p_a = frequent[antecedent] / n
                confidence = support / p_a
                if confidence < min_confidence:
                    continue
                consequent = tuple(i for i in itemset if i not in antecedent)
                p_b = frequent[consequent] / n
                lift = support / (p_a * p_b)
                rules.append(Rule(antecedent, consequent, support, confidence, lift))
    rules.sort(key=lambda r: (-r.lift, -r.support, r.antecedent, r.consequent))
    return RuleSet(rules, n, min_support, min_confidence, min_rule_size)


def segment_markets(
    ruleset: RuleSet, confidence_floor: float = 0.7, items=None
) -> list[MarketSegment]:
    """Connected components of items linked by rules at or above the floor.

    The item universe defaults to every item mentioned by the rule set;
    items untouched by a strong rule become single-item segments.
    """
    universe: set[str] = set(items) if items is not None else set()
    for rule in ruleset.rules:
        universe.update(rule.antecedent)
        universe.update(rule.consequent)
    parent = {item: item for item in universe}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a: str, b: str) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    for rule in ruleset.rules:
        if rule.confidence >= confidence_floor:
            members = list(rule.antecedent) + list(rule.consequent)
            for other in members[1:]:
                union(members[0], other)

    groups: dict[str, list[str]] = {}
    for item in universe:
        groups.setdefault(find(item), []).append(item)
    ordered = sorted(groups.values(), key=lambda g: (-len(g), min(g)))
    return [
        MarketSegment(f"segment_{i + 1}", tuple(sorted(group)))
        for i, group in enumerate(ordered)
    ]


# ---------------------------------------------------------------------------
# file formats


def load_transactions(path) -> list[set[str]]:
    """transactions.csv in long form: tour_id, item."""
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    for col in ("tour_id", "item"):
        if col not in df.columns:
            raise TourDataError(f"transactions.csv: missing column {col!r}")
    by_tour: dict[str, set[str]] = {}
    for _, row in df.iterrows():
        by_tour.setdefault(row["tour_id"], set()).add(row["item"])
    return [by_tour[k] for k in sorted(by_tour)]


def save_transactions(transactions: dict[str, set[str]], path) -> Path:
    path = Path(path)
    rows = [
        {"tour_id": tour_id, "item": item}
        for tour_id in sorted(transactions)
        for item in sorted(transactions[tour_id])
    ]
    pd.DataFrame(rows, columns=["tour_id", "item"]).to_csv(path, index=False)
    return path


def save_rules(ruleset: RuleSet, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(ruleset.to_json_dict(), indent=2, sort_keys=True))
    return path


def save_segments(segments: list[MarketSegment], path) -> Path:
    path = Path(path)
    payload = [{"label": s.label, "items": list(s.items)} for s in segments]
    path.write_text(json.dumps(payload, indent=2, sort_keys=True))
    return path
