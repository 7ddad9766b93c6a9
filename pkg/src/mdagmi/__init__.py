"""Decide whether complete records analysis, multiple imputation, or subsample
multiple imputation can estimate an exposure-outcome coefficient without bias,
given an m-DAG."""

from .dsep import d_separated, open_paths
from .dsl import ParseError, parse, serialize
from .graph import AnalysisSpec, GraphError, MDag, Node, R, Role, Status, build, var
from .validity import (
    analyze,
    compute_phi,
    cra_verdict,
    eligible_q,
    enumerate_subsamples,
    full_mi_verdict,
    subsample_verdict,
    y_self_missingness_warning,
)

__version__ = "0.1.0"
