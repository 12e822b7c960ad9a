"""Rule statistics, level-wise mining vs exhaustive enumeration, segments."""

import numpy as np
import pytest

from oracles import brute_force_rules
from tourmine.rulemine import (
    RuleSet,
    apriori,
    rule_stats,
    segment_markets,
)
from tourmine.types import TourDataError

FIVE = [{"a", "b"}, {"a", "b"}, {"a"}, {"b"}, {"c"}]


class TestRuleStats:
    def test_rule_in_every_transaction(self):
        transactions = [{"a", "b"}] * 4
        assert rule_stats({"a"}, {"b"}, transactions) == (1.0, 1.0, 1.0)

    def test_five_transaction_fixture(self):
        support, confidence, lift = rule_stats({"a"}, {"b"}, FIVE)
        assert support == pytest.approx(0.4, abs=1e-12)
        assert confidence == pytest.approx(2.0 / 3.0, abs=1e-12)
        assert lift == pytest.approx(0.4 / 0.36, abs=1e-12)

    def test_independence_gives_lift_one(self):
        transactions = [{"a", "b"}, {"a"}, {"b"}, set("x")]
        support, confidence, lift = rule_stats({"a"}, {"b"}, transactions)
        assert support == pytest.approx(0.25)
        assert lift == pytest.approx(1.0, abs=1e-12)

    def test_errors(self):
        with pytest.raises(ValueError):
            rule_stats(set(), {"b"}, FIVE)
        with pytest.raises(ValueError):
            rule_stats({"a"}, {"a", "b"}, FIVE)
        with pytest.raises(TourDataError):
            rule_stats({"zzz"}, {"b"}, FIVE)


class TestApriori:
    def test_support_one_keeps_universal_items_only(self):
        transactions = [{"a", "b"}, {"a", "b", "c"}, {"a", "b"}]
        ruleset = apriori(transactions, min_support=1.0, min_confidence=0.1)
        items = {i for r in ruleset.rules for i in r.antecedent + r.consequent}
        assert items == {"a", "b"}
        assert {r.key() for r in ruleset.rules} == {(("a",), ("b",)), (("b",), ("a",))}

    def test_five_transaction_fixture(self):
        ruleset = apriori(FIVE, min_support=0.3, min_confidence=0.5)
        keys = {r.key() for r in ruleset.rules}
        assert (("a",), ("b",)) in keys
        assert (("b",), ("a",)) in keys
        by_key = {r.key(): r for r in ruleset.rules}
        support, confidence, lift = rule_stats({"a"}, {"b"}, FIVE)
        rule = by_key[(("a",), ("b",))]
        assert rule.support == pytest.approx(support, abs=1e-12)
        assert rule.confidence == pytest.approx(confidence, abs=1e-12)
        assert rule.lift == pytest.approx(lift, abs=1e-12)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(13)
        for trial in range(15):
            n_items = int(rng.integers(4, 10))
            items = [f"i{k}" for k in range(n_items)]
            transactions = []
            for _ in range(int(rng.integers(10, 80))):
                size = int(rng.integers(1, min(6, n_items) + 1))
                transactions.append(set(rng.choice(items, size=size, replace=False)))
            ms = float(rng.uniform(0.02, 0.5))
            mc = float(rng.uniform(0.2, 0.9))
            mined = apriori(transactions, ms, mc)
            want = brute_force_rules(transactions, ms, mc)
            got = {r.key(): (r.support, r.confidence, r.lift) for r in mined.rules}
            assert set(got) == set(want), f"trial {trial}"
            for key, stats in want.items():
                assert got[key] == pytest.approx(stats, abs=1e-12)

    def test_min_rule_size_three(self):
        transactions = [{"a", "b", "c"}] * 5 + [{"a", "b"}] * 2
        ruleset = apriori(transactions, 0.1, 0.1, min_rule_size=3)
        assert all(len(r.antecedent) + len(r.consequent) >= 3 for r in ruleset.rules)
        assert any(set(r.antecedent + r.consequent) == {"a", "b", "c"} for r in ruleset.rules)

    def test_order_invariance(self):
        rng = np.random.default_rng(3)
        transactions = [set(rng.choice(list("abcdef"), size=3, replace=False)) for _ in range(40)]
        a = apriori(transactions, 0.1, 0.4)
        b = apriori(list(reversed(transactions)), 0.1, 0.4)
        assert [r.key() for r in a.rules] == [r.key() for r in b.rules]

    def test_downward_closure(self):
        rng = np.random.default_rng(8)
        transactions = [
            set(rng.choice(list("abcdefg"), size=int(rng.integers(1, 5)), replace=False))
            for _ in range(60)
        ]
        from tourmine.rulemine import _as_itemsets, _frequent_itemsets

        sets = _as_itemsets(transactions)
        frequent = _frequent_itemsets(sets, 5)
        from itertools import combinations

        for itemset in frequent:
            for r in range(1, len(itemset)):
                for sub in combinations(itemset, r):
                    assert sub in frequent

    def test_support_bounds_confidence(self):
        ruleset = apriori(FIVE, 0.2, 0.2)
        for rule in ruleset.rules:
            assert rule.support <= rule.confidence <= 1.0

    def test_lift_symmetry(self):
        s1, c1, l1 = rule_stats({"a"}, {"b"}, FIVE)
        s2, c2, l2 = rule_stats({"b"}, {"a"}, FIVE)
        assert l1 == pytest.approx(l2, abs=1e-12)
        assert s1 == pytest.approx(s2, abs=1e-12)

    def test_empty_transactions_rejected(self):
        with pytest.raises(TourDataError):
            apriori([], 0.5, 0.5)

    def test_threshold_validation(self):
        with pytest.raises(ValueError):
            apriori(FIVE, 0.0, 0.5)
        with pytest.raises(ValueError):
            apriori(FIVE, 0.5, 1.5)


def ruleset_from(rule_specs):
    from tourmine.rulemine import Rule

    rules = [
        Rule(tuple(sorted(a)), tuple(sorted(b)), 0.5, conf, 1.5) for a, b, conf in rule_specs
    ]
    return RuleSet(rules, 10, 0.1, 0.1, 2)


class TestSegments:
    def test_no_rule_above_floor(self):
        ruleset = ruleset_from([({"a"}, {"b"}, 0.5), ({"b"}, {"c"}, 0.6)])
        segments = segment_markets(ruleset, confidence_floor=0.7)
        assert sorted(s.items for s in segments) == [("a",), ("b",), ("c",)]

    def test_transitive_components(self):
        ruleset = ruleset_from([({"a"}, {"b"}, 0.9), ({"b"}, {"c"}, 0.8)])
        segments = segment_markets(ruleset, confidence_floor=0.7)
        assert segments[0].items == ("a", "b", "c")

    def test_two_cliques_match_union_find(self):
        rng = np.random.default_rng(21)
        clique1, clique2 = list("abc"), list("xyz")
        specs = []
        for group in (clique1, clique2):
            for i in range(len(group)):
                for j in range(i + 1, len(group)):
                    specs.append(({group[i]}, {group[j]}, float(rng.uniform(0.71, 0.99))))
        specs.append(({"a"}, {"x"}, 0.2))  # weak cross edge stays below floor
        segments = segment_markets(ruleset_from(specs), confidence_floor=0.7)
        assert sorted(s.items for s in segments) == [("a", "b", "c"), ("x", "y", "z")]
        assert [s.label for s in segments] == ["segment_1", "segment_2"]

    def test_segments_disjoint(self):
        ruleset = ruleset_from(
            [({"a"}, {"b"}, 0.9), ({"c"}, {"d"}, 0.9), ({"a", "b"}, {"e"}, 0.3)]
        )
        segments = segment_markets(ruleset, 0.7)
        seen = set()
        for s in segments:
            assert not (seen & set(s.items))
            seen |= set(s.items)
