"""Least squares, fully conditional specification imputation and Rubin's rules.

The estimators follow the scikit-learn API so they can be dropped into
pipelines; :func:`fit_ols` and :func:`pool_rubin` are the thin functional
entry points used by the simulation harness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y


class EstimationError(ValueError):
    pass


@dataclass(frozen=True)
class Estimate:
    """Coefficient of interest with its standard error.

    ``between_undefined`` is set when pooling a single estimate, where the
    between-imputation variance cannot be computed and is taken as zero.
    """

    beta: float
    se: float
    n_used: int
    between_undefined: bool = False


def _design(X: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(X.shape[0]), X])


class OLSRegressor(RegressorMixin, BaseEstimator):
    """Ordinary least squares with an intercept and classical standard errors.

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
    intercept_ : float
    bse_ : ndarray of shape (n_features,)
        Standard errors of ``coef_``.
    intercept_se_ : float
    sigma2_ : float
        Residual variance estimate, RSS / (n - p - 1).
    """

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        n, k = X.shape
        if n < k + 2:
            raise EstimationError(f"need at least {k + 2} rows for {k} predictors, got {n}")
        D = _design(X)
        Q, Rm = np.linalg.qr(D)
        diag = np.abs(np.diag(Rm))
        if diag.min() <= 1e-10 * max(diag.max(), 1.0):
            raise EstimationError("design matrix is rank deficient")
        coef = np.linalg.solve(Rm, Q.T @ y)
        resid = y - D @ coef
        dof = n - k - 1
        sigma2 = float(resid @ resid) / dof
        Rinv = np.linalg.solve(Rm, np.eye(k + 1))
        cov = sigma2 * (Rinv @ Rinv.T)
        se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
        self.intercept_ = float(coef[0])
        self.coef_ = coef[1:]
        self.intercept_se_ = float(se[0])
        self.bse_ = se[1:]
        self.sigma2_ = sigma2
        self.n_features_in_ = k
        self.n_samples_fit_ = n
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=float)
        return self.intercept_ + X @ self.coef_


def fit_ols(dataset, response: str, predictors, row_filter=None) -> Estimate:
    """Fit ``response ~ predictors`` and return the first predictor's coefficient.

    Rows are those selected by ``row_filter`` (boolean mask), default all.
    Cell values are taken as stored, so callers pick rows where the
    variables are observed.
    """
    predictors = list(predictors)
    rows = np.ones(dataset.n, dtype=bool) if row_filter is None else np.asarray(row_filter, dtype=bool)
    X = np.column_stack([dataset.column(p)[rows] for p in predictors])
    y = dataset.column(response)[rows]
    model = OLSRegressor().fit(X, y)
    return Estimate(float(model.coef_[0]), float(model.bse_[0]), int(rows.sum()))


def batched_ols(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """OLS of ``y[i]`` on ``X[i]`` (intercept added) for each leading index ``i``.

    Returns coefficients (without intercept) and their standard errors,
    both of shape (batch, k).
    """
    b, n, k = X.shape
    if n < k + 2:
        raise EstimationError(f"need at least {k + 2} rows for {k} predictors, got {n}")
    D = np.concatenate([np.ones((b, n, 1)), X], axis=2)
    xtx = np.einsum("bni,bnj->bij", D, D)
    xty = np.einsum("bni,bn->bi", D, y)
    try:
        chol = np.linalg.cholesky(xtx)
    except np.linalg.LinAlgError:
        raise EstimationError("design matrix is rank deficient") from None
    coef = np.linalg.solve(xtx, xty[..., None])[..., 0]
    resid = y - np.einsum("bni,bi->bn", D, coef)
    sigma2 = np.einsum("bn,bn->b", resid, resid) / (n - k - 1)
    eye = np.broadcast_to(np.eye(k + 1), chol.shape)
    linv = np.linalg.solve(chol, eye)
    diag = np.einsum("bji,bji->bi", linv, linv)
    se = np.sqrt(sigma2[:, None] * diag)
    return coef[:, 1:], se[:, 1:]


def pool_rubin(estimates) -> Estimate:
    """Combine per-imputation estimates: mean coefficient, W + (1 + 1/m) B variance."""
    estimates = list(estimates)
    m = len(estimates)
    if m == 0:
        raise ValueError("cannot pool an empty list of estimates")
    betas = np.array([e.beta for e in estimates], dtype=float)
    within = float(np.mean([e.se**2 for e in estimates]))
    if m == 1:
        return Estimate(float(betas[0]), float(np.sqrt(within)), estimates[0].n_used, between_undefined=True)
    between = float(np.var(betas, ddof=1))
    total = within + (1 + 1 / m) * between
    return Estimate(float(betas.mean()), float(np.sqrt(total)), max(e.n_used for e in estimates))


class FCSImputer(TransformerMixin, BaseEstimator):
    """Multiple imputation by fully conditional specification (chained equations).

    Each incomplete column is imputed from a Bayesian normal linear
    regression on the other columns (noninformative prior): coefficients
    and residual variance are drawn from their posterior given the rows
    where the column is observed, then missing cells are drawn from the
    predictive distribution.  Missing cells start as random draws from the
    column's observed values.  The ``n_imputations`` chains are
    independent; they are advanced together as one batched array.

    Parameters
    ----------
    n_imputations : int, default=25
    n_cycles : int, default=10
        Full sweeps over the incomplete columns before a chain is emitted.
    predictors : dict or None
        Optional ``{column index: [predictor column indices]}``; by default
        each column is imputed from all the others.
    random_state : int, Generator or None

    ``transform`` returns an array of shape (n_imputations, n_samples, n_features).
    """

    def __init__(self, n_imputations=25, n_cycles=10, predictors=None, random_state=None):
        self.n_imputations = n_imputations
        self.n_cycles = n_cycles
        self.predictors = predictors
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=float, ensure_all_finite="allow-nan")
        self.n_features_in_ = X.shape[1]
        mask = np.isnan(X)
        empty = np.flatnonzero(mask.all(axis=0))
        if empty.size:
            raise EstimationError(f"column(s) {empty.tolist()} have no observed values")
        self.incomplete_ = np.flatnonzero(mask.any(axis=0))
        return self

    def _predictors_for(self, j: int) -> list[int]:
        if self.predictors is not None and j in self.predictors:
            return list(self.predictors[j])
        return [k for k in range(self.n_features_in_) if k != j]

    def transform(self, X):
        check_is_fitted(self, "incomplete_")
        X = check_array(X, dtype=float, ensure_all_finite="allow-nan")
        if X.shape[1] != self.n_features_in_:
            raise ValueError("X has a different number of columns than during fit")
        rng = np.random.default_rng(self.random_state)
        m = self.n_imputations
        mask = np.isnan(X)
        imps = np.broadcast_to(X, (m,) + X.shape).copy()
        cols = [j for j in range(X.shape[1]) if mask[:, j].any()]
        if not cols:
            return imps
        for j in cols:
            miss = mask[:, j]
            pool = X[~miss, j]
            if pool.size == 0:
                raise EstimationError(f"column {j} has no observed values")
            imps[:, miss, j] = rng.choice(pool, size=(m, int(miss.sum())))
        for _ in range(self.n_cycles):
            for j in cols:
                self._draw_column(imps, X, mask[:, j], j, rng)
        return imps

    def _draw_column(self, imps, X, miss, j, rng):
        m = imps.shape[0]
        preds = self._predictors_for(j)
        obs = ~miss
        n_obs = int(obs.sum())
        k = len(preds) + 1
        dof = n_obs - k
        if dof < 1:
            raise EstimationError(f"column {j}: {n_obs} observed rows cannot support {k} parameters")
        Xo = np.concatenate([np.ones((m, n_obs, 1)), imps[:, obs][:, :, preds]], axis=2)
        yo = X[obs, j]
        xtx = np.einsum("bni,bnj->bij", Xo, Xo)
        xty = np.einsum("bni,n->bi", Xo, yo)
        try:
            chol = np.linalg.cholesky(xtx)
        except np.linalg.LinAlgError:
            raise EstimationError(f"column {j}: singular imputation design") from None
        beta_hat = np.linalg.solve(xtx, xty[..., None])[..., 0]
        resid = yo[None, :] - np.einsum("bni,bi->bn", Xo, beta_hat)
        rss = np.einsum("bn,bn->b", resid, resid)
        sigma = np.sqrt(rss / rng.chisquare(dof, size=m))
        # beta* = beta_hat + sigma * L^-T z, so cov(beta*) = sigma^2 (X'X)^-1
        z = rng.standard_normal((m, k, 1))
        offset = np.linalg.solve(np.swapaxes(chol, 1, 2), z)[..., 0]
        beta = beta_hat + sigma[:, None] * offset
        Xm = np.concatenate([np.ones((m, int(miss.sum()), 1)), imps[:, miss][:, :, preds]], axis=2)
        draws = np.einsum("bni,bi->bn", Xm, beta) + sigma[:, None] * rng.standard_normal((m, int(miss.sum())))
        imps[:, miss, j] = draws

    def fit_transform(self, X, y=None, **fit_params):
        return self.fit(X).transform(X)
