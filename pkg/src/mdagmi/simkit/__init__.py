"""Monte Carlo checks of the graph verdicts: data generation, estimators, replication harness."""

from .dgp import DGPS, Dataset, DgpSpec, generate, get_dgp
from .estimators import Estimate, EstimationError, FCSImputer, OLSRegressor, fit_ols, pool_rubin
from .methods import CRA, FULL_MI, Method, MissingDataRegression, run_method, sub
from .study import TABLE_S1, MethodSummary, StudyError, StudyResult, default_methods, run_study
