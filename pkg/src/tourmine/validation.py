"""Input-validation helpers for the estimator-facing API."""

from __future__ import annotations

import numpy as np
import pandas as pd

from tourmine.types import TourDataError


class NotFittedError(TourDataError):
    pass


def check_is_fitted(estimator, attribute: str = "tree_") -> None:
    if getattr(estimator, attribute, None) is None:
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted yet; call fit() first"
        )


def as_category_frame(X, columns=None) -> pd.DataFrame:
    """Coerce rows of categorical attributes to a string-valued DataFrame."""
    if isinstance(X, pd.DataFrame):
        frame = X.copy()
    elif isinstance(X, (list, tuple)) and X and isinstance(X[0], dict):
        frame = pd.DataFrame(list(X))
    else:
        frame = pd.DataFrame(np.asarray(X))
        frame.columns = [str(c) for c in frame.columns]
    if columns is not None:
        missing = [c for c in columns if c not in frame.columns]
        if missing:
            raise ValueError(f"missing attribute column(s) {missing}")
        frame = frame[list(columns)]
    if frame.shape[1] == 0 or frame.shape[0] == 0:
        return frame.astype(str)
    return frame.astype(str)


def check_targets(y, n_rows: int) -> tuple[np.ndarray, np.ndarray]:
    """Split a joint target into (class labels, numeric values) arrays."""
    if isinstance(y, pd.DataFrame):
        if y.shape[1] != 2:
            raise ValueError("y must have exactly two columns: class and numeric")
        labels = y.iloc[:, 0].to_numpy()
        numeric = y.iloc[:, 1].to_numpy(dtype=float)
    elif isinstance(y, tuple) and len(y) == 2:
        labels = np.asarray(y[0])
        numeric = np.asarray(y[1], dtype=float)
    else:
        arr = np.asarray(y, dtype=object)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("y must be (n, 2): class label and numeric value per row")
        labels = arr[:, 0]
        numeric = arr[:, 1].astype(float)
    labels = np.asarray([str(v) for v in labels], dtype=object)
    if len(labels) != n_rows or len(numeric) != n_rows:
        raise ValueError(f"X has {n_rows} rows but y has {len(labels)}")
    if not np.all(np.isfinite(numeric)):
        raise ValueError("numeric target contains non-finite values")
    return labels, numeric
