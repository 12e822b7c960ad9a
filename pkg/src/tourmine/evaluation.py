"""Goodness-of-fit and covariate-impact measures.

Classification quality comes from one-vs-all confusion-matrix metrics
(sensitivity, specificity, precision, balanced accuracy, F1), Cohen's
kappa and the weighted-random-guess baseline.  Model fit on the class
target uses the leaf-weighted probability-matching score rho and its
improvement over the root-only model; the numeric target reports plain
R-squared.  Covariate impact is a chi-square distance between predicted
response frequencies and their independence expectation (magnitude) plus
a normalized signed-difference statistic over ordered levels (direction).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from tourmine.validation import as_category_frame


@dataclass
class ConfusionMatrix:
    """Square count matrix indexed (observed class, predicted class)."""

    labels: tuple[str, ...]
    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=float)
        k = len(self.labels)
        if self.counts.shape != (k, k):
            raise ValueError("counts must be square and match labels")
        if (self.counts < 0).any():
            raise ValueError("counts must be non-negative")

    @classmethod
    def from_predictions(cls, observed, predicted, labels=None) -> "ConfusionMatrix":
        obs = [str(v) for v in observed]
        pred = [str(v) for v in predicted]
        if labels is None:
            labels = tuple(sorted(set(obs) | set(pred)))
        else:
            labels = tuple(str(v) for v in labels)
        index = {c: i for i, c in enumerate(labels)}
        counts = np.zeros((len(labels), len(labels)))
        for o, p in zip(obs, pred):
            counts[index[o], index[p]] += 1
        return cls(labels, counts)

    @property
    def total(self) -> float:
        return float(self.counts.sum())


@dataclass
class ClassStats:
    sensitivity: float | None
    specificity: float | None
    precision: float | None
    balanced_accuracy: float | None
    f1: float | None
    accuracy: float | None


@dataclass
class EvalReport:
    macro_f1: float | None = None
    micro_f1: float | None = None
    one_vs_all_accuracy: float | None = None
    kappa: float | None = None
    wrg: float | None = None
    rho: float | None = None
    rho0: float | None = None
    rho_incr: float | None = None
    r2: float | None = None
    per_class: dict[str, ClassStats] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        d = {
            "Macro-F1": self.macro_f1,
            "Micro-F1": self.micro_f1,
            "One-vs-all": self.one_vs_all_accuracy,
            "kappa": self.kappa,
            "WRG": self.wrg,
            "rho": self.rho,
            "rho_root": self.rho0,
            "rho_incr": self.rho_incr,
            "R2": self.r2,
        }
        d["per_class"] = {
            label: {
                "sensitivity": s.sensitivity,
                "specificity": s.specificity,
                "precision": s.precision,
                "balanced_accuracy": s.balanced_accuracy,
                "f1": s.f1,
                "accuracy": s.accuracy,
            }
            for label, s in self.per_class.items()
        }
        return d


def _safe_ratio(num: float, den: float) -> float | None:
    return None if den == 0 else num / den


def classification_metrics(cm: ConfusionMatrix, class_priors=None) -> EvalReport:
    """One-vs-all metrics, macro/micro aggregates, kappa and the WRG baseline.

    Classes with no observed and no predicted count are marked undefined
    (``None``) and excluded from the macro means, never silently zeroed.
    """
    total = cm.total
    if total <= 0:
        raise ValueError("confusion matrix has zero total count")
    per_class: dict[str, ClassStats] = {}
    tp_sum = fp_sum = fn_sum = 0.0
    for i, label in enumerate(cm.labels):
        tp = float(cm.counts[i, i])
        fn = float(cm.counts[i].sum() - tp)
        fp = float(cm.counts[:, i].sum() - tp)
        tn = total - tp - fn - fp
        if tp + fn + fp == 0:
            per_class[label] = ClassStats(None, None, None, None, None, None)
            continue
        sens = _safe_ratio(tp, tp + fn)
        spec = _safe_ratio(tn, tn + fp)
        prec = _safe_ratio(tp, tp + fp)
        bacc = None if sens is None or spec is None else (sens + spec) / 2.0
        if sens is None or prec is None:
            f1 = None
        elif sens + prec == 0:
            f1 = 0.0
        else:
            f1 = 2.0 * sens * prec / (sens + prec)
        acc = (tp + tn) / total
        per_class[label] = ClassStats(sens, spec, prec, bacc, f1, acc)
        tp_sum += tp
        fp_sum += fp
        fn_sum += fn

    defined_f1 = [s.f1 for s in per_class.values() if s.f1 is not None]
    defined_bacc = [s.balanced_accuracy for s in per_class.values() if s.balanced_accuracy is not None]
    macro_f1 = float(np.mean(defined_f1)) if defined_f1 else None
    one_vs_all = float(np.mean(defined_bacc)) if defined_bacc else None
    micro_f1 = _safe_ratio(2.0 * tp_sum, 2.0 * tp_sum + fp_sum + fn_sum)

    p_observed = cm.counts.sum(axis=1) / total
    p_predicted = cm.counts.sum(axis=0) / total
    p_agree = float(np.trace(cm.counts)) / total
    p_chance = float((p_observed * p_predicted).sum())
    kappa = None if p_chance == 1.0 else (p_agree - p_chance) / (1.0 - p_chance)

    if class_priors is not None:
        priors = np.asarray(list(class_priors), dtype=float)
        priors = priors / priors.sum()
    else:
        priors = p_observed
    wrg = float((priors**2).sum())

    return EvalReport(
        macro_f1=macro_f1,
        micro_f1=micro_f1,
        one_vs_all_accuracy=one_vs_all,
        kappa=kappa,
        wrg=wrg,
        per_class=per_class,
    )


@dataclass
class RhoMetrics:
    rho: float
    rho0: float
    rho_incr: float | None


def rho_metrics(tree, X, observed_classes) -> RhoMetrics:
    """Leaf-weighted probability-matching fit of the class target.

    rho sums, over leaves, the leaf's share of rows times the inner
    product of the observed class shares in the leaf with the leaf's
    stored (fit-time) distribution.  rho0 applies the root's stored
    distribution to the overall observed shares; rho_incr is the relative
    improvement and is undefined (None) when rho0 is already 1.
    """
    labels = np.asarray([str(v) for v in observed_classes], dtype=object)
    if len(labels) == 0:
        raise ValueError("need at least one row")
    leaves = tree.decision_leaves(X)
    if len(leaves) != len(labels):
        raise ValueError("X and observed_classes must have equal length")
    class_index = {c: i for i, c in enumerate(tree.classes_)}

    # group rows by leaf; accumulate count-weighted sums so that pure
    # trees produce exactly 1.0
    by_leaf: dict[int, np.ndarray] = {}
    leaf_nodes: dict[int, object] = {}
    for leaf, label in zip(leaves, labels):
        counts = by_leaf.setdefault(leaf.node_id, np.zeros(len(tree.classes_)))
        leaf_nodes[leaf.node_id] = leaf
        idx = class_index.get(label)
        # observed labels the tree never saw contribute zero match
        if idx is not None:
            counts[idx] += 1
    n = len(labels)
    weighted = 0.0
    for node_id, counts in by_leaf.items():
        predicted = leaf_nodes[node_id].class_distribution
        weighted += float((counts * predicted).sum())
    rho = weighted / n

    root_dist = tree.tree_.class_distribution
    observed_counts = np.zeros(len(tree.classes_))
    for label in labels:
        idx = class_index.get(label)
        if idx is not None:
            observed_counts[idx] += 1
    rho0 = float((observed_counts * root_dist).sum()) / n
    rho_incr = None if rho0 == 1.0 else (rho - rho0) / (1.0 - rho0)
    return RhoMetrics(rho, rho0, rho_incr)


def regression_r2(predictions, observations) -> float:
    """Conventional coefficient of determination."""
    pred = np.asarray(predictions, dtype=float)
    obs = np.asarray(observations, dtype=float)
    if len(obs) < 2:
        raise ValueError("need at least 2 observations")
    ss_tot = float(((obs - obs.mean()) ** 2).sum())
    if ss_tot == 0:
        raise ValueError("zero total variance; R2 undefined")
    ss_res = float(((obs - pred) ** 2).sum())
    return 1.0 - ss_res / ss_tot


def frequency_table(predicted_classes, covariate_values, classes=None, levels=None):
    """Counts of predicted class i (rows) by covariate level j (columns)."""
    pred = [str(v) for v in predicted_classes]
    cov = [str(v) for v in covariate_values]
    if len(pred) != len(cov):
        raise ValueError("inputs must have equal length")
    if classes is None:
        classes = sorted(set(pred))
    if levels is None:
        levels = sorted(set(cov))
    ci = {c: i for i, c in enumerate(classes)}
    li = {l: j for j, l in enumerate(levels)}
    table = np.zeros((len(classes), len(levels)))
    for p, v in zip(pred, cov):
        if p in ci and v in li:
            table[ci[p], li[v]] += 1
    return table, list(classes), list(levels)


def magnitude_of_impact(
    predicted_classes, covariate_values, classes=None, levels=None
) -> tuple[float, dict[str, float], np.ndarray]:
    """Chi-square distance between the predicted frequency table and independence.

    Returns (total MI over alternatives, per-alternative MI, the table).
    Cells whose independence expectation is zero are skipped with a warning.
    """
    table, classes, levels = frequency_table(predicted_classes, covariate_values, classes, levels)
    total = table.sum()
    if total == 0:
        raise ValueError("empty frequency table")
    expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / total
    per_class: dict[str, float] = {}
    skipped = 0
    for i, label in enumerate(classes):
        mi = 0.0
        for j in range(len(levels)):
            if expected[i, j] == 0:
                skipped += 1
                continue
            mi += (table[i, j] - expected[i, j]) ** 2 / expected[i, j]
        per_class[label] = float(mi)
    if skipped:
        warnings.warn(f"magnitude_of_impact: skipped {skipped} zero-expectation cell(s)", stacklevel=2)
    return float(sum(per_class.values())), per_class, table


def direction_of_impact(frequency_row) -> float | None:
    """Normalized sum of consecutive differences over ordered levels.

    1 for a monotonically increasing row, -1 for decreasing, ``None`` when
    every consecutive difference is zero (and for unordered covariates,
    where the caller should not request it).
    """
    f = np.asarray(list(frequency_row), dtype=float)
    if len(f) < 2:
        raise ValueError("need at least two ordered levels")
    diffs = np.diff(f)
    denom = float(np.abs(diffs).sum())
    if denom == 0:
        return None
    return float(diffs.sum() / denom)


@dataclass
class CovariateImpact:
    mi_raw: float
    mi_share: float
    mi_per_class: dict[str, float]
    di_per_class: dict[str, float | None] | None  # None when the covariate is unordered


@dataclass
class ImpactReport:
    covariates: dict[str, CovariateImpact]

    def to_json_dict(self) -> dict:
        return {
            name: {
                "MI": impact.mi_share,
                "MI_raw": impact.mi_raw,
                "MI_per_class": impact.mi_per_class,
                "DI_per_class": impact.di_per_class,
            }
            for name, impact in self.covariates.items()
        }


def impact_report(tree, X, covariates=None, ordered=(), levels_by_covariate=None) -> ImpactReport:
    """Magnitude (normalized across covariates) and direction of impact.

    ``ordered`` names the covariates whose level order is meaningful;
    direction is only reported for those.  Level order defaults to the
    tree's fit-time level order, falling back to sorted values.
    """
    frame = as_category_frame(X)
    covariates = list(covariates) if covariates is not None else list(tree.attributes_)
    predicted = tree.predict_class(frame)
    results: dict[str, tuple[float, dict[str, float], np.ndarray, list[str]]] = {}
    for name in covariates:
        if name not in frame.columns:
            raise ValueError(f"covariate {name!r} not present in rows")
        if levels_by_covariate and name in levels_by_covariate:
            levels = [str(v) for v in levels_by_covariate[name]]
        elif hasattr(tree, "levels_") and name in tree.levels_:
            levels = list(tree.levels_[name])
        else:
            levels = sorted(set(str(v) for v in frame[name]))
        mi, per_class, table = magnitude_of_impact(
            predicted, frame[name], classes=list(tree.classes_), levels=levels
        )
        results[name] = (mi, per_class, table, levels)

    total_mi = sum(mi for mi, _, _, _ in results.values())
    report: dict[str, CovariateImpact] = {}
    for name, (mi, per_class, table, _levels) in results.items():
        share = mi / total_mi if total_mi > 0 else 1.0 / len(results)
        di = None
        if name in ordered:
            di = {}
            for i, label in enumerate(tree.classes_):
                di[label] = direction_of_impact(table[i]) if table.shape[1] >= 2 else None
        report[name] = CovariateImpact(mi, share, per_class, di)
    return ImpactReport(report)


def evaluate_model(tree, X, y_class, y_numeric=None) -> EvalReport:
    """Full report: confusion metrics, rho family and (optionally) R2."""
    frame = as_category_frame(X)
    observed = np.asarray([str(v) for v in y_class], dtype=object)
    predicted = tree.predict_class(frame)
    labels = tuple(tree.classes_) if set(observed) <= set(tree.classes_) else None
    cm = ConfusionMatrix.from_predictions(observed, predicted, labels=labels)
    report = classification_metrics(cm)
    rho = rho_metrics(tree, frame, observed)
    report.rho = rho.rho
    report.rho0 = rho.rho0
    report.rho_incr = rho.rho_incr
    if y_numeric is not None:
        try:
            report.r2 = regression_r2(tree.predict_numeric(frame), y_numeric)
        except ValueError as exc:
            warnings.warn(f"R2 undefined: {exc}", stacklevel=2)
            report.r2 = None
    return report


def save_eval_report(report: EvalReport, path, extra: dict | None = None) -> Path:
    path = Path(path)
    payload = report.to_json_dict()
    if extra:
        payload.update(extra)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True))
    return path


def save_impact_report(report: ImpactReport, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report.to_json_dict(), indent=2, sort_keys=True))
    return path
