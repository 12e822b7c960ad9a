"""Decision tree that learns a categorical and an integer target jointly.

Every candidate attribute at a node is scored on two objectives: the
information gain of the class target and the post-split sum of squared
residuals of the numeric target.  Candidates are ordered by non-dominated
(Pareto) ranking; when several candidates share rank 1 a secondary
criterion picks one — either explicit precedence for one objective, or
the distance rule in min-max-normalized objective space (closest to the
ideal corner for two candidates, closest to the per-objective midpoint
for three or more).  Splits are multiway over the attribute's levels and
an attribute is used at most once per path.

Internal nodes remember the heaviest child as a fallback so that rows
carrying levels unseen at fit time can still be routed.
"""

from __future__ import annotations

import json
import warnings
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator

from tourmine.validation import as_category_frame, check_is_fitted, check_targets

SECONDARY_MODES = ("distance", "precedence_IG", "precedence_SSR")


def entropy(distribution) -> float:
    """Shannon entropy in bits, with 0*log(0) = 0."""
    p = np.asarray(list(distribution), dtype=float)
    if (p < 0).any():
        raise ValueError("probabilities must be non-negative")
    total = p.sum()
    if not np.isclose(total, 1.0, atol=1e-6):
        raise ValueError(f"probabilities must sum to 1, got {total}")
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def _entropy_from_counts(counts: np.ndarray) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts[counts > 0] / n
    return float(-(p * np.log2(p)).sum())


def split_objectives(attribute_values, class_labels, numeric_values) -> tuple[float, float]:
    """(SSR, information gain) of splitting these rows on the attribute.

    Information gain uses the level-weighted conditional entropy; SSR sums
    squared deviations of the numeric target around each level's mean.
    """
    attr = np.asarray([str(v) for v in attribute_values], dtype=object)
    labels = np.asarray([str(v) for v in class_labels], dtype=object)
    numeric = np.asarray(numeric_values, dtype=float)
    if not (len(attr) == len(labels) == len(numeric)):
        raise ValueError("inputs must have equal length")
    levels, level_codes = np.unique(attr, return_inverse=True)
    classes, class_codes = np.unique(labels, return_inverse=True)
    ssr, ig = _objectives_from_codes(
        level_codes, len(levels), class_codes, len(classes), numeric
    )
    return ssr, ig


def _objectives_from_codes(
    level_codes: np.ndarray,
    n_levels: int,
    class_codes: np.ndarray,
    n_classes: int,
    numeric: np.ndarray,
) -> tuple[float, float]:
    n = len(level_codes)
    joint = np.bincount(level_codes * n_classes + class_codes, minlength=n_levels * n_classes)
    joint = joint.reshape(n_levels, n_classes)
    level_counts = joint.sum(axis=1)
    parent_entropy = _entropy_from_counts(joint.sum(axis=0))

    conditional = 0.0
    for li in range(n_levels):
        if level_counts[li] == 0:
            continue
        conditional += (level_counts[li] / n) * _entropy_from_counts(joint[li])
    ig = parent_entropy - conditional

    sums = np.bincount(level_codes, weights=numeric, minlength=n_levels)
    sums_sq = np.bincount(level_codes, weights=numeric**2, minlength=n_levels)
    ssr = 0.0
    for li in range(n_levels):
        if level_counts[li] == 0:
            continue
        ssr += sums_sq[li] - sums[li] ** 2 / level_counts[li]
    return float(max(0.0, ssr)), float(max(0.0, ig))


@dataclass
class SplitCandidate:
    """One attribute's objective pair at a node, plus its Pareto bookkeeping."""

    attribute: str
    ssr: float
    info_gain: float
    domination_count: int = 0
    dominated: list = field(default_factory=list, repr=False)
    rank: int = 0


def dominates(a: SplitCandidate, b: SplitCandidate) -> bool:
    """True iff ``a`` is no worse in both objectives and better in one.

    Canonical space minimizes both coordinates: (SSR, -IG).
    """
    if a.ssr <= b.ssr and a.info_gain >= b.info_gain:
        return a.ssr < b.ssr or a.info_gain > b.info_gain
    return False


def rank_candidates(candidates: list[SplitCandidate]) -> list[SplitCandidate]:
    """Assign non-dominated ranks (1 = Pareto front) by front peeling."""
    if not candidates:
        raise ValueError("no candidates to rank")
    for c in candidates:
        c.domination_count = 0
        c.dominated = []
        c.rank = 0
    for p in candidates:
        for q in candidates:
            if p is q:
                continue
            if dominates(p, q):
                p.dominated.append(q)
            elif dominates(q, p):
                p.domination_count += 1
    front = [c for c in candidates if c.domination_count == 0]
    for c in front:
        c.rank = 1
    rank = 1
    while front:
        nxt = []
        for p in front:
            for q in p.dominated:
                q.domination_count -= 1
                if q.domination_count == 0:
                    q.rank = rank + 1
                    nxt.append(q)
        front = nxt
        rank += 1
    return candidates


def _normalized(candidates: list[SplitCandidate]) -> dict[str, tuple[float, float]]:
    """Min-max normalize the canonical (SSR, -IG) pairs over the node's candidates."""
    ssrs = [c.ssr for c in candidates]
    igs = [c.info_gain for c in candidates]
    lo1, hi1 = min(ssrs), max(ssrs)
    lo2, hi2 = min(igs), max(igs)

    def norm(v, lo, hi):
        return 0.0 if hi == lo else (v - lo) / (hi - lo)

    return {
        c.attribute: (norm(c.ssr, lo1, hi1), norm(hi2 - c.info_gain, 0.0, hi2 - lo2))
        for c in candidates
    }


def select_split(
    rank1: list[SplitCandidate],
    candidates: list[SplitCandidate],
    mode: str = "distance",
) -> SplitCandidate:
    """Choose one attribute from the rank-1 set.

    ``distance`` mode: a single rank-1 candidate wins outright; with two,
    the smaller L1 distance to the ideal corner (0, 0) of normalized
    objective space wins; with three or more, the smallest L1 distance to
    the per-objective midpoint over all of the node's candidates wins.
    Ties break lexicographically on the attribute name.
    """
    if not rank1:
        raise ValueError("empty rank-1 set")
    if mode not in SECONDARY_MODES:
        raise ValueError(f"unknown secondary mode {mode!r}")
    if len(rank1) == 1:
        return rank1[0]
    if mode == "precedence_IG":
        return min(rank1, key=lambda c: (-c.info_gain, c.ssr, c.attribute))
    if mode == "precedence_SSR":
        return min(rank1, key=lambda c: (c.ssr, -c.info_gain, c.attribute))

    coords = _normalized(candidates)
    if len(rank1) == 2:
        return min(rank1, key=lambda c: (sum(coords[c.attribute]), c.attribute))
    all_coords = list(coords.values())
    mid1 = (max(g[0] for g in all_coords) + min(g[0] for g in all_coords)) / 2.0
    mid2 = (max(g[1] for g in all_coords) + min(g[1] for g in all_coords)) / 2.0

    def midpoint_distance(c: SplitCandidate) -> float:
        g1, g2 = coords[c.attribute]
        return abs(mid1 - g1) + abs(mid2 - g2)

    return min(rank1, key=lambda c: (midpoint_distance(c), c.attribute))


@dataclass
class TreeNode:
    node_id: int
    depth: int
    n_samples: int
    class_counts: np.ndarray
    numeric_mean: float
    numeric_variance: float
    split_attribute: str | None = None
    children: dict[str, "TreeNode"] = field(default_factory=dict)
    fallback_level: str | None = None

    @property
    def is_leaf(self) -> bool:
        return self.split_attribute is None

    @property
    def class_distribution(self) -> np.ndarray:
        return self.class_counts / self.class_counts.sum()


@dataclass
class RowPrediction:
    distribution: dict[str, float]
    class_label: str
    numeric: float
    leaf_id: int


class MultiTaskDecisionTree(BaseEstimator):
    """Joint classifier/regressor over categorical attributes.

    Parameters
    ----------
    max_depth:
        Maximum tree depth; ``None`` grows until the other criteria stop.
    min_samples_leaf:
        A split is rejected if any child would receive fewer rows.
    secondary_mode:
        Rank-1 tie resolution: ``"distance"`` (default), ``"precedence_IG"``
        or ``"precedence_SSR"``.
    min_info_gain / min_ssr_reduction:
        Growth stops when the selected candidate improves neither
        objective beyond these thresholds.
    class_order:
        Explicit class ordering used for argmax tie-breaks; defaults to
        sorted order of the labels seen at fit time.
    attribute_levels:
        Optional ``{attribute: ordered levels}``; defaults to sorted
        observed levels.
    """

    def __init__(
        self,
        max_depth: int | None = None,
        min_samples_leaf: int = 1,
        secondary_mode: str = "distance",
        min_info_gain: float = 1e-12,
        min_ssr_reduction: float = 1e-12,
        class_order: tuple | None = None,
        attribute_levels: dict | None = None,
    ):
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.secondary_mode = secondary_mode
        self.min_info_gain = min_info_gain
        self.min_ssr_reduction = min_ssr_reduction
        self.class_order = class_order
        self.attribute_levels = attribute_levels
        self.tree_ = None

    # -- fitting -----------------------------------------------------------

    def fit(self, X, y):
        if self.secondary_mode not in SECONDARY_MODES:
            raise ValueError(f"unknown secondary mode {self.secondary_mode!r}")
        frame = as_category_frame(X)
        if frame.shape[0] == 0:
            raise ValueError("cannot fit on an empty dataset")
        labels, numeric = check_targets(y, len(frame))
        if self.min_samples_leaf > len(frame):
            raise ValueError("fewer rows than min_samples_leaf")

        self.attributes_ = [str(c) for c in frame.columns]
        if self.class_order is not None:
            declared = [str(c) for c in self.class_order]
            extra = sorted(set(labels) - set(declared))
            if extra:
                raise ValueError(f"labels outside declared class order: {extra}")
            self.classes_ = list(declared)
        else:
            self.classes_ = sorted(set(labels))
        class_index = {c: i for i, c in enumerate(self.classes_)}
        y_class = np.asarray([class_index[v] for v in labels], dtype=np.int64)
        y_num = np.asarray(numeric, dtype=float)

        self.levels_: dict[str, list[str]] = {}
        codes = np.empty((len(frame), len(self.attributes_)), dtype=np.int64)
        for j, attr in enumerate(self.attributes_):
            column = frame[attr].to_numpy()
            if self.attribute_levels and attr in self.attribute_levels:
                levels = [str(v) for v in self.attribute_levels[attr]]
                index = {v: i for i, v in enumerate(levels)}
                try:
                    codes[:, j] = [index[v] for v in column]
                except KeyError as exc:
                    raise ValueError(f"attribute {attr}: undeclared level {exc}") from None
            else:
                levels_arr, inverse = np.unique(column, return_inverse=True)
                levels = [str(v) for v in levels_arr]
                codes[:, j] = inverse
            self.levels_[attr] = levels

        self._y_class = y_class
        self._y_num = y_num
        self._codes = codes
        self.tree_ = self._grow(np.arange(len(frame)))
        self.n_nodes_ = len(self._nodes_by_id)
        self.depth_ = max(node.depth for node in self._nodes_by_id.values())
        del self._y_class, self._y_num, self._codes
        return self

    def _node_stats(self, idx: np.ndarray) -> tuple[np.ndarray, float, float]:
        counts = np.bincount(self._y_class[idx], minlength=len(self.classes_))
        values = self._y_num[idx]
        mean = float(values.mean())
        variance = float(((values - mean) ** 2).mean())
        return counts, mean, variance

    def _grow(self, root_idx: np.ndarray) -> TreeNode:
        self._nodes_by_id: dict[int, TreeNode] = {}
        next_id = 1
        counts, mean, var = self._node_stats(root_idx)
        root = TreeNode(next_id, 0, len(root_idx), counts, mean, var)
        self._nodes_by_id[next_id] = root
        next_id += 1
        queue: deque[tuple[TreeNode, np.ndarray, frozenset]] = deque(
            [(root, root_idx, frozenset())]
        )
        while queue:
            node, idx, used = queue.popleft()
            decision = self._decide_split(node, idx, used)
            if decision is None:
                continue
            best, partitions = decision
            node.split_attribute = best.attribute
            level_order = self.levels_[best.attribute]
            heaviest = max(partitions, key=lambda code: (len(partitions[code]), -code))
            node.fallback_level = level_order[heaviest]
            for code in sorted(partitions):
                child_idx = partitions[code]
                counts, mean, var = self._node_stats(child_idx)
                child = TreeNode(next_id, node.depth + 1, len(child_idx), counts, mean, var)
                self._nodes_by_id[next_id] = child
                next_id += 1
                node.children[level_order[code]] = child
                queue.append((child, child_idx, used | {best.attribute}))
        return root

    def _decide_split(self, node: TreeNode, idx: np.ndarray, used: frozenset):
        pure_class = int((node.class_counts > 0).sum()) <= 1
        if pure_class and node.numeric_variance == 0.0:
            return None
        if self.max_depth is not None and node.depth >= self.max_depth:
            return None

        candidates: list[SplitCandidate] = []
        partitions_by_attr: dict[str, dict[int, np.ndarray]] = {}
        y_class = self._y_class[idx]
        y_num = self._y_num[idx]
        for j, attr in enumerate(self.attributes_):
            if attr in used:
                continue
            level_codes = self._codes[idx, j]
            present = np.unique(level_codes)
            if len(present) < 2:
                continue
            ssr, ig = _objectives_from_codes(
                level_codes, len(self.levels_[attr]), y_class, len(self.classes_), y_num
            )
            candidates.append(SplitCandidate(attr, ssr, ig))
            partitions_by_attr[attr] = {
                int(code): idx[level_codes == code] for code in present
            }
        if not candidates:
            return None

        rank_candidates(candidates)
        rank1 = [c for c in candidates if c.rank == 1]
        best = select_split(rank1, candidates, self.secondary_mode)
        partitions = partitions_by_attr[best.attribute]
        if any(len(rows) < self.min_samples_leaf for rows in partitions.values()):
            return None
        node_ss = node.numeric_variance * node.n_samples
        if best.info_gain <= self.min_info_gain and (node_ss - best.ssr) <= self.min_ssr_reduction:
            return None
        return best, partitions

    # -- prediction --------------------------------------------------------

    def _leaf_for_codes(self, row: pd.Series) -> TreeNode:
        node = self.tree_
        while not node.is_leaf:
            level = str(row[node.split_attribute])
            child = node.children.get(level)
            if child is None:
                child = node.children[node.fallback_level]
            node = child
        return node

    def decision_leaves(self, X) -> list[TreeNode]:
        check_is_fitted(self)
        frame = as_category_frame(X, columns=self.attributes_)
        return [self._leaf_for_codes(row) for _, row in frame.iterrows()]

    def apply(self, X) -> np.ndarray:
        return np.asarray([leaf.node_id for leaf in self.decision_leaves(X)], dtype=np.int64)

    def predict_proba(self, X) -> np.ndarray:
        return np.vstack([leaf.class_distribution for leaf in self.decision_leaves(X)])

    def predict_class(self, X) -> np.ndarray:
        proba = self.predict_proba(X)
        # argmax takes the first maximum, i.e. ties break by class order
        idx = proba.argmax(axis=1)
        return np.asarray([self.classes_[i] for i in idx], dtype=object)

    def predict_numeric(self, X) -> np.ndarray:
        return np.asarray([leaf.numeric_mean for leaf in self.decision_leaves(X)])

    def predict(self, X) -> np.ndarray:
        """(n, 2) array of [predicted class, numeric estimate] per row."""
        leaves = self.decision_leaves(X)
        out = np.empty((len(leaves), 2), dtype=object)
        for i, leaf in enumerate(leaves):
            dist = leaf.class_distribution
            out[i, 0] = self.classes_[int(dist.argmax())]
            out[i, 1] = leaf.numeric_mean
        return out

    def predict_row(self, row) -> RowPrediction:
        check_is_fitted(self)
        series = pd.Series({k: str(v) for k, v in dict(row).items()})
        leaf = self._leaf_for_codes(series)
        dist = leaf.class_distribution
        return RowPrediction(
            distribution={c: float(p) for c, p in zip(self.classes_, dist)},
            class_label=self.classes_[int(dist.argmax())],
            numeric=leaf.numeric_mean,
            leaf_id=leaf.node_id,
        )

    def node(self, node_id: int) -> TreeNode:
        check_is_fitted(self)
        return self._nodes_by_id[node_id]

    def split_sequence(self) -> dict[int, str]:
        """node_id -> split attribute for every internal node."""
        check_is_fitted(self)
        return {
            nid: node.split_attribute
            for nid, node in sorted(self._nodes_by_id.items())
            if not node.is_leaf
        }

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        check_is_fitted(self)
        nodes = []
        for nid in sorted(self._nodes_by_id):
            node = self._nodes_by_id[nid]
            nodes.append(
                {
                    "id": node.node_id,
                    "depth": node.depth,
                    "n": node.n_samples,
                    "class_counts": [int(c) for c in node.class_counts],
                    "numeric_mean": node.numeric_mean,
                    "numeric_variance": node.numeric_variance,
                    "split_attribute": node.split_attribute,
                    "children": {level: child.node_id for level, child in node.children.items()},
                    "fallback_level": node.fallback_level,
                }
            )
        return {
            "classes": list(self.classes_),
            "attributes": list(self.attributes_),
            "levels": {k: list(v) for k, v in self.levels_.items()},
            "params": {
                "max_depth": self.max_depth,
                "min_samples_leaf": self.min_samples_leaf,
                "secondary_mode": self.secondary_mode,
                "min_info_gain": self.min_info_gain,
                "min_ssr_reduction": self.min_ssr_reduction,
            },
            "nodes": nodes,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "MultiTaskDecisionTree":
        params = payload.get("params", {})
        est = cls(
            max_depth=params.get("max_depth"),
            min_samples_leaf=params.get("min_samples_leaf", 1),
            secondary_mode=params.get("secondary_mode", "distance"),
            min_info_gain=params.get("min_info_gain", 1e-12),
            min_ssr_reduction=params.get("min_ssr_reduction", 1e-12),
        )
        est.classes_ = [str(c) for c in payload["classes"]]
        est.attributes_ = [str(a) for a in payload["attributes"]]
        est.levels_ = {k: [str(v) for v in vs] for k, vs in payload["levels"].items()}
        nodes: dict[int, TreeNode] = {}
        for spec in payload["nodes"]:
            nodes[spec["id"]] = TreeNode(
                spec["id"],
                spec["depth"],
                spec["n"],
                np.asarray(spec["class_counts"], dtype=float),
                spec["numeric_mean"],
                spec["numeric_variance"],
                spec["split_attribute"],
                {},
                spec["fallback_level"],
            )
        for spec in payload["nodes"]:
            for level, child_id in spec["children"].items():
                nodes[spec["id"]].children[level] = nodes[child_id]
        est._nodes_by_id = nodes
        est.tree_ = nodes[min(nodes)]
        est.n_nodes_ = len(nodes)
        est.depth_ = max(node.depth for node in nodes.values())
        return est

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_json(cls, path) -> "MultiTaskDecisionTree":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dot(self) -> str:
        """Graphviz source: internal nodes show the split attribute, leaves
        their class distribution and numeric mean."""
        check_is_fitted(self)
        lines = ["digraph tree {", "  node [shape=box, fontsize=10];"]
        for nid in sorted(self._nodes_by_id):
            node = self._nodes_by_id[nid]
            if node.is_leaf:
                dist = ", ".join(
                    f"{c}: {p:.2f}" for c, p in zip(self.classes_, node.class_distribution)
                )
                label = f"#{nid} n={node.n_samples}\\n{dist}\\nstops mean={node.numeric_mean:.2f}"
            else:
                label = f"#{nid} {node.split_attribute}\\nn={node.n_samples}"
            lines.append(f'  n{nid} [label="{label}"];')
        for nid in sorted(self._nodes_by_id):
            node = self._nodes_by_id[nid]
            for level in sorted(node.children):
                lines.append(f'  n{nid} -> n{node.children[level].node_id} [label="{level}"];')
        lines.append("}")
        return "\n".join(lines)


@dataclass
class Hyperparams:
    """Training configuration consumed by the CLI's train stage."""

    max_depth_grid: tuple[int, ...] = (1, 2, 3, 4, 5)
    min_samples_leaf: int = 1
    cv_folds: int = 10
    validation_fraction: float = 0.1
    secondary_mode: str = "distance"
    oversample: bool = False
    seed: int = 0

    def __post_init__(self):
        if not self.max_depth_grid:
            raise ValueError("max_depth_grid must be non-empty")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be >= 2")
        if self.secondary_mode not in SECONDARY_MODES:
            raise ValueError(f"unknown secondary mode {self.secondary_mode!r}")


def oversample_minority(X, y, seed: int = 0):
    """Resample minority classes with replacement until class counts equalize.

    Stand-in for synthetic oversampling, appropriate because all features
    are categorical.  A single-class input is returned unchanged with a
    warning; balanced input is returned unchanged.
    """
    frame = as_category_frame(X)
    labels, numeric = check_targets(y, len(frame))
    counts: dict[str, int] = {}
    for label in labels:
        counts[label] = counts.get(label, 0) + 1
    if len(counts) < 2:
        warnings.warn("oversample_minority: single-class input left unchanged", stacklevel=2)
        return frame, np.column_stack([labels, numeric]).astype(object)
    target = max(counts.values())
    if all(c == target for c in counts.values()):
        return frame, np.column_stack([labels, numeric]).astype(object)
    rng = np.random.default_rng(seed)
    extra_indices: list[int] = []
    for label in sorted(counts):
        need = target - counts[label]
        if need == 0:
            continue
        pool = np.flatnonzero(labels == label)
        extra_indices.extend(rng.choice(pool, size=need, replace=True).tolist())
    order = list(range(len(frame))) + extra_indices
    new_frame = frame.iloc[order].reset_index(drop=True)
    new_y = np.column_stack([labels[order], numeric[order]]).astype(object)
    return new_frame, new_y


def _stratified_folds(labels: np.ndarray, folds: int, rng: np.random.Generator) -> list[np.ndarray]:
    buckets: list[list[int]] = [[] for _ in range(folds)]
    offset = 0
    for label in sorted(set(labels)):
        idx = np.flatnonzero(labels == label)
        rng.shuffle(idx)
        for k, row in enumerate(idx):
            buckets[(offset + k) % folds].append(int(row))
        offset += len(idx)
    return [np.asarray(sorted(b), dtype=np.int64) for b in buckets]


def _validation_r2(observed: np.ndarray, predicted: np.ndarray) -> float:
    ss_res = float(((observed - predicted) ** 2).sum())
    ss_tot = float(((observed - observed.mean()) ** 2).sum())
    if ss_tot == 0.0:
        return 1.0 if ss_res < 1e-12 else 0.0
    return 1.0 - ss_res / ss_tot


@dataclass
class CVDepthResult:
    best_depth: int
    table: list[dict]
    folds: int
    seed: int

    def to_json_dict(self) -> dict:
        return {
            "best_depth": self.best_depth,
            "folds": self.folds,
            "seed": self.seed,
            "table": self.table,
        }


def cross_validate_depth(
    X,
    y,
    depth_grid,
    folds: int = 10,
    min_samples_leaf: int = 1,
    secondary_mode: str = "distance",
    seed: int = 0,
    oversample: bool = False,
    score_weights: tuple[float, float] = (0.5, 0.5),
) -> CVDepthResult:
    """Pick a depth by stratified k-fold validation.

    The per-fold score weighs the probability-matching fit of the class
    target and the R-squared of the numeric target equally by default;
    depth ties go to the shallower tree.
    """
    from tourmine.evaluation import rho_metrics

    frame = as_category_frame(X)
    labels, numeric = check_targets(y, len(frame))
    if len(frame) < folds:
        raise ValueError(f"need at least {folds} rows for {folds}-fold validation")
    rng = np.random.default_rng(seed)
    fold_indices = _stratified_folds(labels, folds, rng)
    w_rho, w_r2 = score_weights

    table: list[dict] = []
    for depth in sorted(set(int(d) for d in depth_grid)):
        rhos, r2s = [], []
        for fold in fold_indices:
            if len(fold) == 0:
                continue
            mask = np.ones(len(frame), dtype=bool)
            mask[fold] = False
            X_train = frame.iloc[mask].reset_index(drop=True)
            y_train = np.column_stack([labels[mask], numeric[mask]]).astype(object)
            if oversample:
                X_train, y_train = oversample_minority(X_train, y_train, seed=seed)
            est = MultiTaskDecisionTree(
                max_depth=depth,
                min_samples_leaf=min_samples_leaf,
                secondary_mode=secondary_mode,
            ).fit(X_train, y_train)
            X_val = frame.iloc[fold]
            rho = rho_metrics(est, X_val, labels[fold]).rho
            r2 = _validation_r2(numeric[fold], est.predict_numeric(X_val))
            rhos.append(rho)
            r2s.append(r2)
        mean_rho = float(np.mean(rhos))
        mean_r2 = float(np.mean(r2s))
        table.append(
            {
                "depth": depth,
                "rho": mean_rho,
                "r2": mean_r2,
                "score": w_rho * mean_rho + w_r2 * mean_r2,
            }
        )
    best = max(table, key=lambda row: (row["score"], -row["depth"]))
    return CVDepthResult(best["depth"], table, folds, seed)
