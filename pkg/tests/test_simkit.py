import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from mdagmi.simkit import (
    CRA,
    DGPS,
    FULL_MI,
    Dataset,
    DgpSpec,
    Estimate,
    EstimationError,
    FCSImputer,
    Method,
    MissingDataRegression,
    OLSRegressor,
    StudyError,
    default_methods,
    fit_ols,
    generate,
    get_dgp,
    pool_rubin,
    run_method,
    run_study,
    sub,
)
from mdagmi.simkit import study as study_mod
from mdagmi.simkit.dgp import Equation, ObservationRule, Threshold
from mdagmi.simkit.estimators import batched_ols

from oracles import normal_equations_ols


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


# -- least squares -----------------------------------------------------------------


def test_ols_matches_normal_equations_oracle_on_100_problems():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        n, k = int(rng.integers(8, 60)), int(rng.integers(1, 5))
        X = rng.normal(size=(n, k)) * rng.uniform(0.5, 3, size=k) + rng.normal(size=k)
        y = X @ rng.normal(size=k) + rng.normal() + rng.normal(size=n)
        beta, se = normal_equations_ols(X.tolist(), y.tolist())
        model = OLSRegressor().fit(X, y)
        got_beta = [model.intercept_, *model.coef_]
        got_se = [model.intercept_se_, *model.bse_]
        for g, e in zip(got_beta + got_se, beta + se):
            worst = max(worst, _rel(g, e))
    assert worst <= 1e-10


def test_exact_fit_has_zero_se():
    x = np.arange(10.0)
    model = OLSRegressor().fit(x[:, None], 2 * x)
    assert model.coef_[0] == pytest.approx(2.0, abs=1e-12)
    assert model.bse_[0] == pytest.approx(0.0, abs=1e-12)


def test_ols_errors():
    with pytest.raises(EstimationError):
        OLSRegressor().fit(np.ones((10, 1)), np.arange(10.0))
    with pytest.raises(EstimationError):
        OLSRegressor().fit(np.arange(6.0).reshape(3, 2), np.arange(3.0))


def test_ols_estimator_api():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 2))
    y = X @ [1.0, -2.0] + 0.5
    model = clone(OLSRegressor()).fit(X, y)
    assert np.allclose(model.predict(X), y)
    assert model.score(X, y) == pytest.approx(1.0)


def test_batched_ols_agrees_with_single_fits():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(4, 40, 3))
    y = rng.normal(size=(4, 40))
    coef, se = batched_ols(X, y)
    for i in range(4):
        m = OLSRegressor().fit(X[i], y[i])
        assert np.allclose(coef[i], m.coef_, rtol=1e-10)
        assert np.allclose(se[i], m.bse_, rtol=1e-10)


def test_fit_ols_row_filter():
    x = np.arange(20.0)
    y = 3 * x + 1
    y[:5] = 0.0
    ds = Dataset(("y", "x"), np.column_stack([y, x]), np.ones((20, 2), dtype=bool))
    est = fit_ols(ds, "y", ["x"], x >= 5)
    assert est.beta == pytest.approx(3.0) and est.n_used == 15


# -- Rubin's rules ------------------------------------------------------------------


def test_rubin_two_imputations():
    pooled = pool_rubin([Estimate(0.0, 1.0, 10), Estimate(2.0, 1.0, 10)])
    assert pooled.beta == 1.0
    assert pooled.se**2 == pytest.approx(4.0)
    assert pooled.se == pytest.approx(2.0)


def test_rubin_identical_estimates():
    pooled = pool_rubin([Estimate(0.7, 0.3, 10)] * 5)
    assert pooled.beta == pytest.approx(0.7)
    assert pooled.se == pytest.approx(0.3)
    assert not pooled.between_undefined


def test_rubin_single_and_empty():
    one = pool_rubin([Estimate(1.5, 0.2, 10)])
    assert (one.beta, one.se, one.between_undefined) == (1.5, 0.2, True)
    with pytest.raises(ValueError):
        pool_rubin([])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.floats(-10, 10), st.floats(0, 5)), min_size=1, max_size=30))
def test_rubin_total_variance_at_least_within(pairs):
    pooled = pool_rubin([Estimate(b, s, 1) for b, s in pairs])
    within = float(np.mean([s * s for _, s in pairs]))
    assert pooled.se**2 >= within * (1 - 1e-12) - 1e-300
    assert pooled.beta == pytest.approx(float(np.mean([b for b, _ in pairs])))


# -- imputation ---------------------------------------------------------------------------


def test_fcs_without_missing_returns_copies():
    X = np.random.default_rng(1).normal(size=(25, 3))
    imps = FCSImputer(n_imputations=4, random_state=0).fit_transform(X)
    assert imps.shape == (4, 25, 3)
    assert all(np.array_equal(c, X) for c in imps)


def test_fcs_keeps_observed_cells_and_fills_missing():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(100, 3))
    X[rng.random(X.shape) < 0.2] = np.nan
    imps = FCSImputer(n_imputations=3, n_cycles=2, random_state=4).fit_transform(X)
    obs = ~np.isnan(X)
    for c in imps:
        assert np.array_equal(c[obs], X[obs])
        assert not np.isnan(c).any()
    again = FCSImputer(n_imputations=3, n_cycles=2, random_state=4).fit_transform(X)
    assert np.array_equal(imps, again)
    assert not np.array_equal(imps[0], imps[1])


def test_fcs_errors_and_params():
    X = np.ones((10, 2))
    X[:, 1] = np.nan
    with pytest.raises(EstimationError):
        FCSImputer().fit(X)
    imp = FCSImputer(n_imputations=7, n_cycles=3)
    assert clone(imp).get_params()["n_imputations"] == 7
    fitted = FCSImputer().fit(np.array([[1.0, np.nan], [2.0, 3.0], [3.0, 4.0], [4.0, 6.0]]))
    with pytest.raises(ValueError):
        fitted.transform(np.ones((3, 3)))


def test_fcs_mcar_mean_recovery():
    # bivariate normal, 40% of the second column deleted completely at random
    rng = np.random.default_rng(12)
    true_mean = 1.0
    cov = [[1.0, 0.6], [0.6, 1.0]]
    pooled, full = [], []
    for _ in range(200):
        Z = rng.multivariate_normal([0.0, true_mean], cov, size=200)
        full.append(Z[:, 1].mean())
        X = Z.copy()
        X[rng.random(200) < 0.4, 1] = np.nan
        imps = FCSImputer(n_imputations=5, n_cycles=5, random_state=rng).fit_transform(X)
        pooled.append(imps[:, :, 1].mean())
    pooled, full = np.array(pooled), np.array(full)
    mcse = pooled.std(ddof=1) / math.sqrt(len(pooled))
    assert abs(pooled.mean() - true_mean) <= 3 * mcse
    diff = pooled - full
    assert abs(diff.mean()) <= 3 * diff.std(ddof=1) / math.sqrt(len(diff))


# -- data generation -------------------------------------------------------------------------


def test_fig1b_marginals():
    n = 200_000
    ds = generate(get_dgp("fig1b"), n, 9)
    assert abs(ds.column("X").mean() - 1) <= 3 * math.sqrt(0.5 / n)
    assert abs(ds.observed_mask("Y").mean() - 0.5) <= 3 * math.sqrt(0.25 / n)
    # P(observe X) is 0.9 below the median of Y and 0.1 above
    below = ds.column("Y") < np.median(ds.column("Y"))
    assert ds.observed_mask("X")[below].mean() == pytest.approx(0.9, abs=0.01)
    assert ds.observed_mask("X")[~below].mean() == pytest.approx(0.1, abs=0.01)


def test_generate_is_deterministic():
    a = generate(get_dgp("fig5c"), 300, 4)
    b = generate(get_dgp("fig5c"), 300, 4)
    assert np.array_equal(a.values, b.values) and np.array_equal(a.observed, b.observed)
    with pytest.raises(ValueError):
        generate(get_dgp("fig5c"), 5, 4)


def test_unmeasured_and_complete_columns():
    ds = generate(get_dgp("fig5b"), 500, 1)
    assert not ds.observed_mask("U").any()
    assert ds.observed_mask("X").all()
    masked = ds.masked(["W", "Y"])
    assert np.array_equal(np.isnan(masked), ~ds.observed[:, [ds.index("W"), ds.index("Y")]])


@pytest.mark.parametrize("scenario", sorted(DGPS))
def test_full_data_ols_is_unbiased(scenario):
    spec = get_dgp(scenario)
    rng = np.random.default_rng(100)
    betas = []
    for _ in range(300):
        ds = generate(spec, 500, rng).fully_observed()
        betas.append(fit_ols(ds, spec.outcome, [spec.exposure, *spec.covariates]).beta)
    betas = np.array(betas)
    assert abs(betas.mean() - spec.true_beta) <= 3 * betas.std(ddof=1) / math.sqrt(len(betas))


def test_dgp_spec_validation():
    with pytest.raises(ValueError):
        DgpSpec("t", "Y", "X", (), (Equation("Y", 0.0, (("X", 1.0),)), Equation("X", 0.0)), ())
    with pytest.raises(ValueError):
        DgpSpec("t", "Y", "X", (), (Equation("X", 0.0), Equation("Y", 0.0)), (ObservationRule("Y", (), 1.5),))
    with pytest.raises(ValueError):
        DgpSpec(
            "t", "Y", "X", (), (Equation("X", 0.0), Equation("Y", 0.0)),
            (ObservationRule("Y", (((Threshold("Q", "<"),), 0.5),), 1.0),),
        )
    with pytest.raises(KeyError):
        get_dgp("fig99")
    assert DGPS["fig4"].to_dict()["true_beta"] == 0.15


# -- methods ----------------------------------------------------------------------------------


def test_method_labels():
    assert Method.parse("sub(W, X)") == sub("W", "X")
    assert str(sub("X", "Y")) == "sub(X,Y)"
    assert Method.parse("cra") is not None and Method.parse("full_mi") == FULL_MI
    for bad in ("subsample", "sub()", "mi"):
        with pytest.raises(ValueError):
            Method.parse(bad)
    assert [m.label for m in default_methods("fig4")] == ["cra", "full_mi", "sub(X)", "sub(W)", "sub(W,X)"]


def test_no_missing_data_methods_equal_ols():
    spec = get_dgp("fig4")
    ds = generate(spec, 400, 3).fully_observed()
    ols = fit_ols(ds, "Y", ["X", "W"])
    for method in (CRA, FULL_MI, sub("X"), sub("W", "X")):
        est = run_method(ds, method, "Y", "X", ("W",), m=5, cycles=2, rng=1)
        assert est.beta == ols.beta
        assert est.se == ols.se


def test_run_method_on_missing_data():
    spec = get_dgp("fig4")
    ds = generate(spec, 400, 3)
    est = run_method(ds, sub("X"), "Y", "X", ("W",), m=5, cycles=3, rng=2)
    assert est.n_used == int(ds.observed_mask("X").sum())
    assert est.se > 0
    cra = run_method(ds, CRA, "Y", "X", ("W",))
    complete = ds.observed_mask("X") & ds.observed_mask("Y") & ds.observed_mask("W")
    assert cra.n_used == int(complete.sum())
    with pytest.raises(ValueError):
        run_method(ds, sub("U"), "Y", "X", ("W",))


def test_empty_subsample_errors():
    values = np.random.default_rng(0).normal(size=(20, 2))
    observed = np.ones((20, 2), dtype=bool)
    observed[:, 1] = False
    ds = Dataset(("Y", "X"), values, observed)
    with pytest.raises(EstimationError):
        run_method(ds, sub("X"), "Y", "X")
    with pytest.raises(EstimationError):
        run_method(ds, CRA, "Y", "X")


def test_missing_data_regression_estimator():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(200, 2))
    y = 0.5 * X[:, 0] - X[:, 1] + rng.normal(size=200)
    full = MissingDataRegression(method="full_mi").fit(X, y)
    assert full.coef_ == OLSRegressor().fit(X, y).coef_[0]
    Xm = X.copy()
    Xm[rng.random(200) < 0.3, 0] = np.nan
    model = clone(MissingDataRegression(method="sub(y)", m=5, cycles=3, random_state=0)).fit(Xm, y)
    assert abs(model.coef_ - 0.5) < 0.3 and model.n_features_in_ == 2
    with pytest.raises(ValueError):
        MissingDataRegression().fit(X, y[:10])


# -- study harness ------------------------------------------------------------------------


def test_study_smoke_is_deterministic():
    a = run_study("fig1b", reps=2, n=200, m=3, cycles=2, seed=5)
    b = run_study("fig1b", reps=2, n=200, m=3, cycles=2, seed=5)
    assert a.to_csv() == b.to_csv() and a.to_json() == b.to_json()
    assert a.to_csv().splitlines()[0] == "scenario,method,reps,n,m,mean_bias,empirical_se,mcse,failures"
    assert [s.method for s in a.summaries] == ["cra", "full_mi", "sub(Y)", "sub(X)"]
    assert all(s.reps == 2 for s in a.summaries)
    c = run_study("fig1b", reps=2, n=200, m=3, cycles=2, seed=6)
    assert c.to_csv() != a.to_csv()


def test_study_independent_of_worker_count():
    serial = run_study("fig4", reps=4, n=150, m=3, cycles=2, seed=2, workers=1)
    parallel = run_study("fig4", reps=4, n=150, m=3, cycles=2, seed=2, workers=2)
    assert serial.to_csv() == parallel.to_csv()
    for label in serial.betas:
        assert np.array_equal(serial.betas[label], parallel.betas[label])


def test_study_replications_do_not_depend_on_order():
    spec = get_dgp("fig5a")
    methods = default_methods("fig5a")
    row = study_mod.replicate(spec, 3, 150, 3, 2, 9, methods)
    again = study_mod.replicate(spec, 3, 150, 3, 2, 9, methods[::-1])
    assert row == again[::-1]


def test_study_parameter_errors():
    with pytest.raises(ValueError):
        run_study("fig4", reps=1)
    with pytest.raises(ValueError):
        run_study("fig4", reps=2, n=5)


def test_study_counts_failures(monkeypatch):
    real = study_mod.run_method
    calls = {"n": 0}

    def flaky(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] == 1:
            raise EstimationError("boom")
        return real(*args, **kwargs)

    monkeypatch.setattr(study_mod, "run_method", flaky)
    with pytest.raises(StudyError):
        run_study("fig1a", reps=2, n=100, m=2, cycles=1, seed=1, methods=["cra"])

    calls["n"] = 0
    result = run_study("fig1a", reps=200, n=60, m=2, cycles=1, seed=1, methods=["cra"])
    assert result.summary("cra").failures == 1
    assert np.isnan(result.betas["cra"]).sum() == 1
