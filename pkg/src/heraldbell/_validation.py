"""Input validation shared by the estimators."""
from __future__ import annotations

import numpy as np
from sklearn.utils import check_array


def check_outcomes(X) -> np.ndarray:
    """Coerce trial data to an ``(n, 4)`` int array of ``(x, y, a, b)``.

    Accepts a :class:`~heraldbell.simulate.RecordBatch` (heralded records are
    kept), a sequence of ``TrialRecord``, or any array-like of rows.
    """
    from .simulate import RecordBatch, TrialRecord

    if isinstance(X, RecordBatch):
        h = X.heralded
        X = np.column_stack([X.x[h], X.y[h], X.a[h], X.b[h]])
    elif isinstance(X, (list, tuple)) and X and isinstance(X[0], TrialRecord):
        missing = [r.trial_id for r in X if r.a is None]
        if missing:
            raise ValueError(f"records without outcomes: trial_id {missing[:5]}")
        X = [(r.x, r.y, r.a, r.b) for r in X]
    X = check_array(X, dtype=np.int64, ensure_min_samples=1)
    if X.shape[1] != 4:
        raise ValueError(f"expected 4 columns (x, y, a, b), got {X.shape[1]}")
    if not np.isin(X[:, :2], (0, 1)).all():
        raise ValueError("settings x, y must be 0 or 1")
    if not np.isin(X[:, 2:], (-1, 1)).all():
        raise ValueError("outcomes a, b must be +1 or -1")
    return X
