"""CHSH estimation from trial records and the local-model bound."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import planner
from ._validation import check_outcomes

SIGNS = {(0, 0): 1, (0, 1): 1, (1, 0): 1, (1, 1): -1}


class InsufficientDataError(ValueError):
    """A setting pair has no events."""


@dataclass(frozen=True)
class ChshEstimate:
    counts: dict          # "x,y" -> {"++", "+-", "-+", "--"} -> count
    correlators: dict     # "x,y" -> E
    S: float
    std_error: float      # count-based propagation
    model_std_error: float
    N: int
    p_value_bound: float | None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def count_table(X) -> np.ndarray:
    """``n[x, y, i_a, i_b]`` with index 0 for outcome +1 and 1 for -1."""
    X = check_outcomes(X)
    table = np.zeros((2, 2, 2, 2), dtype=np.int64)
    np.add.at(table, (X[:, 0], X[:, 1], (X[:, 2] < 0).astype(int), (X[:, 3] < 0).astype(int)), 1)
    return table


def _from_counts(table: np.ndarray, fixed_n: bool = True) -> ChshEstimate:
    corr, var = {}, 0.0
    for x in (0, 1):
        for y in (0, 1):
            cell = table[x, y]
            n = int(cell.sum())
            if n == 0:
                raise InsufficientDataError(f"no events for setting pair x={x}, y={y}")
            e = (cell[0, 0] + cell[1, 1] - cell[0, 1] - cell[1, 0]) / n
            corr[f"{x},{y}"] = float(e)
            var += (1 - e * e) / n
    s = sum(SIGNS[x, y] * corr[f"{x},{y}"] for x in (0, 1) for y in (0, 1))
    n_total = int(table.sum())
    v_hat = min(max(abs(s) / planner.TSIRELSON, 0.0), 1.0)
    counts = {f"{x},{y}": {"++": int(table[x, y, 0, 0]), "+-": int(table[x, y, 0, 1]),
                           "-+": int(table[x, y, 1, 0]), "--": int(table[x, y, 1, 1])}
              for x in (0, 1) for y in (0, 1)}
    return ChshEstimate(
        counts=counts, correlators=corr, S=float(s), std_error=math.sqrt(var),
        model_std_error=planner.chsh_std(v_hat, n_total), N=n_total,
        p_value_bound=planner.local_model_bound(s, n_total) if fixed_n else None,
    )


def estimate(records, fixed_n: bool = True) -> ChshEstimate:
    """CHSH value S = E00 + E01 + E10 - E11 from heralded records.

    ``fixed_n=False`` marks data whose size was not declared in advance; the
    local-model bound is then withheld.
    """
    return _from_counts(count_table(records), fixed_n=fixed_n)


def p_value_bound(est: ChshEstimate) -> float:
    return planner.local_model_bound(est.S, est.N)


def model_std(v_eff: float, n: float) -> float:
    return planner.chsh_std(v_eff, n)


class ChshEstimator(BaseEstimator):
    """Estimator wrapper: ``fit`` on ``(x, y, a, b)`` rows or simulator records.

    Parameters
    ----------
    fixed_n : bool
        Whether the number of events was fixed before the run; the
        local-model bound is only reported when it was.
    alpha : float
        Significance level used by :meth:`rejects_local_models`.
    """

    def __init__(self, fixed_n=True, alpha=0.05):
        self.fixed_n = fixed_n
        self.alpha = alpha

    def fit(self, X, y=None):
        return self.fit_from_counts(count_table(X))

    def partial_fit(self, X, y=None):
        """Accumulate counts across batches; merging is order-independent."""
        table = count_table(X)
        if hasattr(self, "counts_"):
            table = table + self.counts_
        return self.fit_from_counts(table)

    def fit_from_counts(self, table):
        table = np.asarray(table, dtype=np.int64).reshape(2, 2, 2, 2)
        self.counts_ = table
        self.estimate_ = _from_counts(table, fixed_n=self.fixed_n)
        self.correlators_ = np.array([[self.estimate_.correlators[f"{x},{y}"] for y in (0, 1)]
                                      for x in (0, 1)])
        self.S_ = self.estimate_.S
        self.std_error_ = self.estimate_.std_error
        self.n_events_ = self.estimate_.N
        self.p_value_bound_ = self.estimate_.p_value_bound
        return self

    def score(self, X=None, y=None):
        """The fitted CHSH value (refits first when ``X`` is given)."""
        if X is not None:
            self.fit(X)
        check_is_fitted(self, "S_")
        return self.S_

    def rejects_local_models(self) -> bool:
        check_is_fitted(self, "S_")
        if self.p_value_bound_ is None:
            raise ValueError("local-model bound unavailable: event count was not fixed in advance")
        return self.p_value_bound_ <= self.alpha
