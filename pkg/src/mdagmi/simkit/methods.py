"""Complete records analysis, full-sample MI and subsample MI on a :class:`Dataset`."""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array

from .dgp import Dataset
from .estimators import Estimate, EstimationError, FCSImputer, batched_ols, fit_ols, pool_rubin

_SUB_RE = re.compile(r"^sub\(([^)]*)\)$")


@dataclass(frozen=True)
class Method:
    """``kind`` is ``cra``, ``full_mi`` or ``subsample_mi``; ``q`` lists the restricted variables."""

    kind: str
    q: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("cra", "full_mi", "subsample_mi"):
            raise ValueError(f"unknown method kind {self.kind!r}")
        if self.kind == "subsample_mi" and not self.q:
            raise ValueError("subsample_mi needs at least one restricted variable")
        if self.kind != "subsample_mi" and self.q:
            raise ValueError(f"{self.kind} takes no restricted variables")

    @property
    def label(self) -> str:
        if self.kind == "subsample_mi":
            return "sub(" + ",".join(self.q) + ")"
        return self.kind

    @classmethod
    def parse(cls, text: str) -> "Method":
        text = text.strip()
        if text in ("cra", "full_mi"):
            return cls(text)
        m = _SUB_RE.match(text.replace(" ", ""))
        if not m:
            raise ValueError(f"cannot parse method {text!r}; use cra, full_mi or sub(A,B)")
        return cls("subsample_mi", tuple(x for x in m.group(1).split(",") if x))

    def __str__(self) -> str:
        return self.label


CRA = Method("cra")
FULL_MI = Method("full_mi")


def sub(*q: str) -> Method:
    return Method("subsample_mi", tuple(q))


def _pooled_fit(imps: np.ndarray, columns, response: str, predictors) -> Estimate:
    y = imps[:, :, columns.index(response)]
    X = imps[:, :, [columns.index(p) for p in predictors]]
    coef, se = batched_ols(X, y)
    ests = [Estimate(float(b), float(s), imps.shape[1]) for b, s in zip(coef[:, 0], se[:, 0])]
    return pool_rubin(ests)


def run_method(
    dataset,
    method: Method,
    outcome: str,
    exposure: str,
    covariates=(),
    auxiliaries=(),
    m: int = 25,
    cycles: int = 10,
    rng=None,
) -> Estimate:
    """Estimate the exposure coefficient with ``method``.

    * ``cra`` fits on rows with every analysis-model variable observed;
    * ``full_mi`` imputes every incomplete modelled variable over all rows;
    * ``subsample_mi`` keeps rows with every ``q`` variable observed and
      imputes the rest within them.

    The imputation model holds the analysis-model variables plus ``auxiliaries``.
    """
    if isinstance(method, str):
        method = Method.parse(method)
    predictors = [exposure, *covariates]
    model_vars = [outcome, *predictors]
    imp_vars = model_vars + [a for a in auxiliaries if a not in model_vars]

    if method.kind == "cra":
        rows = np.all([dataset.observed_mask(v) for v in model_vars], axis=0)
        if rows.sum() == 0:
            raise EstimationError("no complete records")
        return fit_ols(dataset, outcome, predictors, rows)

    rows = np.ones(dataset.n, dtype=bool)
    for v in method.q:
        if v not in imp_vars:
            raise ValueError(f"{v!r} is not in the imputation model")
        rows &= dataset.observed_mask(v)
    if not rows.any():
        raise EstimationError("empty subsample")
    data = dataset.masked(imp_vars)[rows]
    if not np.isnan(data).any():
        # nothing to impute: every copy is the data, so pooling gives the plain fit
        return fit_ols(dataset, outcome, predictors, rows)
    imputer = FCSImputer(n_imputations=m, n_cycles=cycles, random_state=rng)
    imps = imputer.fit_transform(data)
    return _pooled_fit(imps, imp_vars, outcome, predictors)


class MissingDataRegression(BaseEstimator):
    """Estimator wrapper around :func:`run_method` for array input with NaN for missing cells.

    ``fit(X, y)`` takes the exposure as the first column of ``X`` and any
    covariates after it; ``y`` is the outcome.  Inside, columns are named
    ``y, x0, x1, ...``, so a subsample method reads e.g. ``"sub(x0)"``.

    Attributes
    ----------
    coef_ : float
        Coefficient of the exposure.
    se_ : float
    n_used_ : int
    """

    def __init__(self, method="cra", m=25, cycles=10, random_state=None):
        self.method = method
        self.m = m
        self.cycles = cycles
        self.random_state = random_state

    def fit(self, X, y):
        X = check_array(X, dtype=float, ensure_all_finite="allow-nan")
        y = check_array(np.asarray(y, dtype=float).reshape(-1, 1), ensure_all_finite="allow-nan")
        if len(y) != len(X):
            raise ValueError("X and y have different numbers of rows")
        names = ["y"] + [f"x{i}" for i in range(X.shape[1])]
        values = np.column_stack([y, X])
        ds = Dataset(tuple(names), np.nan_to_num(values), ~np.isnan(values))
        method = self.method if isinstance(self.method, Method) else Method.parse(self.method)
        est = run_method(
            ds, method, "y", "x0", names[2:], m=self.m, cycles=self.cycles, rng=self.random_state
        )
        self.coef_ = est.beta
        self.se_ = est.se
        self.n_used_ = est.n_used
        self.n_features_in_ = X.shape[1]
        return self
