"""Freight-tour analytics toolkit.

Pipeline stages: synthetic data generation, activity-type imputation,
zonal congestion indicators, tour feature engineering, association-rule
market segmentation, and a multi-task decision tree that predicts a
categorical and an integer target jointly.
"""

from tourmine.types import (
    Dataset,
    ShipmentRecord,
    StopRecord,
    TourRecord,
    ValidationError,
    Zone,
)
from tourmine.io import load_dataset, save_dataset
from tourmine.mtdt import MultiTaskDecisionTree, cross_validate_depth, oversample_minority
from tourmine.rulemine import apriori, rule_stats, segment_markets
from tourmine.evaluation import classification_metrics, evaluate_model, regression_r2, rho_metrics

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "MultiTaskDecisionTree",
    "ShipmentRecord",
    "StopRecord",
    "TourRecord",
    "ValidationError",
    "Zone",
    "apriori",
    "classification_metrics",
    "cross_validate_depth",
    "evaluate_model",
    "load_dataset",
    "oversample_minority",
    "regression_r2",
    "rho_metrics",
    "rule_stats",
    "save_dataset",
    "segment_markets",
    "__version__",
]
