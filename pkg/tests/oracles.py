"""Independent brute-force oracles used by the unit and acceptance tests.

Nothing here imports the implementation paths it checks: rule mining is
verified against per-transaction subset enumeration, Pareto ranks against
pairwise peeling, the geometric median against refined grid search, Jenks
breaks against exhaustive partition enumeration, and the joint tree's
degenerate behavior against plain single-objective reference trees.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np


def brute_force_rules(transactions, min_support, min_confidence, min_rule_size=2):
    """All rules passing the thresholds, via exhaustive subset counting.

    Returns {(antecedent, consequent): (support, confidence, lift)} with
    both sides as sorted tuples.
    """
    sets = [frozenset(t) for t in transactions]
    n = len(sets)
    counts: dict[tuple, int] = {}
    for t in sets:
        items = sorted(t)
        for r in range(1, len(items) + 1):
            for combo in combinations(items, r):
                counts[combo] = counts.get(combo, 0) + 1
    rules = {}
    for itemset, count in counts.items():
        if len(itemset) < min_rule_size:
            continue
        support = count / n
        if support < min_support:
            continue
        for r in range(1, len(itemset)):
            for antecedent in combinations(itemset, r):
                p_a = counts[antecedent] / n
                confidence = support / p_a
                if confidence < min_confidence:
                    continue
                consequent = tuple(i for i in itemset if i not in antecedent)
                p_b = counts[consequent] / n
                rules[(antecedent, consequent)] = (support, confidence, support / (p_a * p_b))
    return rules


def pareto_ranks(ssr, info_gain):
    """Non-dominated ranks (1-based) by straightforward pairwise peeling.

    Minimizes ssr, maximizes info_gain.
    """
    f1 = np.asarray(ssr, dtype=float)
    f2 = np.asarray(info_gain, dtype=float)
    n = len(f1)
    ranks = np.zeros(n, dtype=int)
    remaining = np.arange(n)
    rank = 1
    while len(remaining):
        f1r, f2r = f1[remaining], f2[remaining]
        dominated = np.zeros(len(remaining), dtype=bool)
        for i in range(len(remaining)):
            better = (
                (f1r <= f1r[i])
                & (f2r >= f2r[i])
                & ((f1r < f1r[i]) | (f2r > f2r[i]))
            )
            dominated[i] = bool(better.any())
        front = remaining[~dominated]
        ranks[front] = rank
        remaining = remaining[dominated]
        rank += 1
    return ranks


def grid_geometric_median(points, tol):
    """Refined grid search for the summed-distance minimizer.

    The objective is convex, so repeatedly zooming a 61x61 grid onto the
    best cell (with a two-cell margin) converges to the global optimum.
    """
    pts = np.asarray(points, dtype=float)
    lo = pts.min(axis=0) - 1.0
    hi = pts.max(axis=0) + 1.0
    best = None
    while True:
        xs = np.linspace(lo[0], hi[0], 61)
        ys = np.linspace(lo[1], hi[1], 61)
        gx, gy = np.meshgrid(xs, ys)
        grid = np.stack([gx.ravel(), gy.ravel()], axis=1)
        dists = np.linalg.norm(grid[:, None, :] - pts[None, :, :], axis=2).sum(axis=1)
        best = grid[int(np.argmin(dists))]
        spacing = max(xs[1] - xs[0], ys[1] - ys[0])
        if spacing < tol / 2:
            return best
        lo = best - 2 * spacing
        hi = best + 2 * spacing


def exhaustive_jenks(values, k):
    """Optimal 1-D classification by enumerating every break placement."""
    data = np.sort(np.asarray(list(values), dtype=float))
    n = len(data)

    def ssd(chunk):
        return float(((chunk - chunk.mean()) ** 2).sum())

    best_cost, best_breaks = float("inf"), None
    for cuts in combinations(range(1, n), k - 1):
        bounds = [0, *cuts, n]
        cost = sum(ssd(data[bounds[i] : bounds[i + 1]]) for i in range(k))
        if cost < best_cost - 1e-12:
            best_cost = cost
            best_breaks = [float(data[c - 1]) for c in cuts]
    return best_breaks, best_cost


def jenks_cost(values, breaks):
    """Total within-class SSD of the classification implied by breaks."""
    data = np.sort(np.asarray(list(values), dtype=float))
    edges = [-np.inf, *breaks, np.inf]
    total = 0.0
    for lo, hi in zip(edges, edges[1:]):
        chunk = data[(data > lo) & (data <= hi)]
        if len(chunk):
            total += float(((chunk - chunk.mean()) ** 2).sum())
    return total


# ---------------------------------------------------------------------------
# single-objective reference trees (for the degeneration checks)


def _entropy(labels):
    _, counts = np.unique(labels, return_counts=True)
    p = counts / counts.sum()
    return float(-(p * np.log2(p)).sum())


def _info_gain(attr, labels):
    h = _entropy(labels)
    n = len(labels)
    cond = 0.0
    for level in np.unique(attr):
        mask = attr == level
        cond += (mask.sum() / n) * _entropy(labels[mask])
    return h - cond


def _ssr_after(attr, numeric):
    total = 0.0
    for level in np.unique(attr):
        chunk = numeric[attr == level]
        total += float(((chunk - chunk.mean()) ** 2).sum())
    return total


def grow_reference_tree(
    X,
    target,
    objective: str,
    max_depth=None,
    min_samples_leaf=1,
    min_improvement=1e-12,
):
    """Plain single-task multiway tree (argmax IG or argmin SSR).

    Mirrors the structural policy of the joint tree (no attribute reuse
    on a path, multiway splits, child-size stop, lexicographic
    tie-break) while sharing none of its code.  Nodes record whether the
    winning objective value was tied.
    """
    columns = list(X.columns)
    data = {c: X[c].to_numpy().astype(str) for c in columns}
    target = np.asarray(target)

    def grow(idx, depth, used):
        node = {"n": len(idx), "attribute": None, "tied": False, "children": {}}
        if objective == "ig":
            if len(np.unique(target[idx])) <= 1:
                return node
        else:
            if float(np.ptp(target[idx].astype(float))) == 0.0:
                return node
        if max_depth is not None and depth >= max_depth:
            return node
        scores = {}
        for c in columns:
            if c in used:
                continue
            col = data[c][idx]
            if len(np.unique(col)) < 2:
                continue
            if objective == "ig":
                scores[c] = _info_gain(col, target[idx])
            else:
                values = target[idx].astype(float)
                scores[c] = float(((values - values.mean()) ** 2).sum()) - _ssr_after(col, values)
        if not scores:
            return node
        best_value = max(scores.values())
        # near-ties count as ties: the two implementations may order equal
        # mathematical values differently at float precision
        winners = sorted(c for c, v in scores.items() if v >= best_value - 1e-9)
        attribute = winners[0]
        node["tied"] = len(winners) > 1
        if best_value <= min_improvement:
            return node
        col = data[attribute][idx]
        groups = {level: idx[col == level] for level in np.unique(col)}
        if any(len(g) < min_samples_leaf for g in groups.values()):
            return node
        node["attribute"] = attribute
        for level, rows in groups.items():
            node["children"][str(level)] = grow(rows, depth + 1, used | {attribute})
        return node

    return grow(np.arange(len(target)), 0, frozenset())


def same_split_sequence(reference_node, tree_node) -> bool:
    """Lockstep comparison of split attributes, skipping tied subtrees."""
    if reference_node["tied"]:
        return True
    ref_attr = reference_node["attribute"]
    tree_attr = tree_node.split_attribute
    if ref_attr is None or tree_attr is None:
        return ref_attr is None and tree_attr is None
    if ref_attr != tree_attr:
        return False
    for level, ref_child in reference_node["children"].items():
        if level not in tree_node.children:
            return False
        if not same_split_sequence(ref_child, tree_node.children[level]):
            return False
    return True
