"""Replication harness: bias and empirical SE of each method over many simulated datasets."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .dgp import DgpSpec, generate, get_dgp
from .estimators import EstimationError
from .methods import CRA, FULL_MI, Method, run_method

log = logging.getLogger(__name__)

WORKERS_ENV = "MDAGMI_WORKERS"
CSV_COLUMNS = ("scenario", "method", "reps", "n", "m", "mean_bias", "empirical_se", "mcse", "failures")
MAX_FAILURE_FRACTION = 0.01


@dataclass(frozen=True)
class PublishedCell:
    label: str  # "unbiased" or "biased"
    bias: float
    se: float


# Published results for each scenario: method -> (verdict, average bias, empirical SE).
TABLE_S1: dict[str, dict[str, PublishedCell]] = {
    "fig1a": {
        "cra": PublishedCell("unbiased", 0.005, 0.086),
        "full_mi": PublishedCell("biased", -0.034, 0.072),
        "sub(Y)": PublishedCell("unbiased", 0.003, 0.085),
        "sub(X)": PublishedCell("unbiased", 0.005, 0.087),
    },
    "fig1b": {
        "cra": PublishedCell("biased", -0.060, 0.052),
        "full_mi": PublishedCell("biased", -0.039, 0.073),
        "sub(Y)": PublishedCell("unbiased", -0.002, 0.085),
        "sub(X)": PublishedCell("biased", -0.059, 0.052),
    },
    "fig4": {
        "cra": PublishedCell("unbiased", 0.003, 0.118),
        "full_mi": PublishedCell("biased", 0.073, 0.100),
        "sub(X)": PublishedCell("unbiased", -0.002, 0.090),
        "sub(W)": PublishedCell("unbiased", 0.003, 0.119),
        "sub(W,X)": PublishedCell("unbiased", 0.003, 0.112),
    },
    "fig5a": {
        "cra": PublishedCell("biased", -0.077, 0.083),
        "full_mi": PublishedCell("biased", -0.022, 0.076),
        "sub(Y)": PublishedCell("unbiased", 0.000, 0.069),
        "sub(W)": PublishedCell("biased", -0.079, 0.084),
    },
    "fig5b": {
        "cra": PublishedCell("biased", 0.045, 0.082),
        "full_mi": PublishedCell("biased", 0.063, 0.072),
        "sub(Y)": PublishedCell("biased", 0.018, 0.073),
        "sub(W)": PublishedCell("biased", 0.046, 0.084),
    },
    "fig5c": {
        "cra": PublishedCell("biased", -0.047, 0.005),
        "full_mi": PublishedCell("biased", -0.402, 0.005),
        "sub(Y)": PublishedCell("biased", 0.018, 0.005),
        "sub(W)": PublishedCell("biased", -0.049, 0.005),
        "sub(X,Y)": PublishedCell("unbiased", 0.004, 0.006),
    },
}


def default_methods(scenario: str) -> tuple[Method, ...]:
    """CRA, full-sample MI and the subsample analyses reported for ``scenario``."""
    labels = TABLE_S1.get(scenario)
    if labels is None:
        return (CRA, FULL_MI)
    return tuple(Method.parse(lbl) for lbl in labels)


@dataclass(frozen=True)
class MethodSummary:
    scenario: str
    method: str
    reps: int
    n: int
    m: int
    mean_bias: float
    empirical_se: float
    mcse: float
    failures: int

    def row(self) -> list:
        return [self.scenario, self.method, self.reps, self.n, self.m,
                _fmt(self.mean_bias), _fmt(self.empirical_se), _fmt(self.mcse), self.failures]


def _fmt(x: float) -> str:
    return repr(float(x))


@dataclass(frozen=True)
class StudyResult:
    scenario: str
    reps: int
    n: int
    m: int
    cycles: int
    seed: int
    summaries: tuple[MethodSummary, ...]
    betas: dict  # method label -> ndarray of per-replication estimates (NaN on failure)
    true_beta: float = 0.15
    notes: tuple[str, ...] = ()

    def summary(self, method) -> MethodSummary:
        label = str(method)
        for s in self.summaries:
            if s.method == label:
                return s
        raise KeyError(label)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for s in self.summaries:
            w.writerow(s.row())
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "scenario": self.scenario,
            "reps": self.reps,
            "n": self.n,
            "m": self.m,
            "cycles": self.cycles,
            "seed": self.seed,
            "true_beta": self.true_beta,
            "methods": [asdict(s) for s in self.summaries],
            "notes": list(self.notes),
        }
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"


class StudyError(RuntimeError):
    pass


def _stream(seed: int, rep: int, key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep, key)))


def _method_key(method: Method) -> int:
    return 1 + zlib.crc32(method.label.encode())


def replicate(spec: DgpSpec, rep: int, n: int, m: int, cycles: int, seed: int, methods) -> list[float]:
    """One replication: simulate, then estimate with each method (NaN where it fails).

    Random streams depend only on (seed, rep, method label), so results do
    not depend on the order or grouping in which replications run.
    """
    data = generate(spec, n, _stream(seed, rep, 0))
    out = []
    for method in methods:
        try:
            est = run_method(
                data, method, spec.outcome, spec.exposure, spec.covariates,
                m=m, cycles=cycles, rng=_stream(seed, rep, _method_key(method)),
            )
            out.append(est.beta)
        except (EstimationError, np.linalg.LinAlgError) as exc:
            log.debug("rep %d %s failed: %s", rep, method, exc)
            out.append(float("nan"))
    return out


def _replicate_chunk(args) -> list[list[float]]:
    spec, reps, n, m, cycles, seed, methods = args
    return [replicate(spec, r, n, m, cycles, seed, methods) for r in reps]


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run_study(
    scenario: str,
    reps: int = 500,
    n: int = 1000,
    m: int = 25,
    cycles: int = 10,
    seed: int = 1,
    methods=None,
    workers: int | None = None,
    spec: DgpSpec | None = None,
) -> StudyResult:
    """Simulate ``reps`` datasets and summarise each method's bias against the true coefficient."""
    if reps < 2:
        raise ValueError("reps must be at least 2")
    if n < 10 or m < 1 or cycles < 1:
        raise ValueError("n must be >= 10, m >= 1 and cycles >= 1")
    spec = spec or get_dgp(scenario)
    methods = tuple(Method.parse(x) if isinstance(x, str) else x for x in (methods or default_methods(scenario)))
    workers = default_workers() if workers is None else max(1, int(workers))

    if workers == 1:
        rows = _replicate_chunk((spec, range(reps), n, m, cycles, seed, methods))
    else:
        chunks = [range(i, reps, workers) for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_replicate_chunk, [(spec, c, n, m, cycles, seed, methods) for c in chunks]))
        rows = [None] * reps
        for chunk, part in zip(chunks, parts):
            for r, vals in zip(chunk, part):
                rows[r] = vals
    betas = np.array(rows, dtype=float).reshape(reps, len(methods))

    summaries = []
    for k, method in enumerate(methods):
        col = betas[:, k]
        ok = col[~np.isnan(col)]
        failures = reps - ok.size
        if failures > MAX_FAILURE_FRACTION * reps:
            raise StudyError(f"{method} failed in {failures} of {reps} replications")
        bias = ok - spec.true_beta
        emp_se = float(np.std(ok, ddof=1)) if ok.size > 1 else float("nan")
        summaries.append(
            MethodSummary(
                scenario, method.label, reps, n, m,
                float(bias.mean()), emp_se, emp_se / np.sqrt(ok.size), failures,
            )
        )
    return StudyResult(
        scenario, reps, n, m, cycles, seed, tuple(summaries),
        {mth.label: betas[:, k] for k, mth in enumerate(methods)}, spec.true_beta, spec.notes,
    )
