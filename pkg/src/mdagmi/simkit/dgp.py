"""Data-generating mechanisms for the simulation scenarios.

Variables are linear-Gaussian: ``V = intercept + sum(coef * parent) + noise_sd * eps``
with independent standard-normal ``eps``, simulated in declaration order.
Observation probabilities are piecewise constant in threshold conditions
on empirical quantiles of the realized (pre-masking) data.  Quantiles use
linear interpolation between order statistics (numpy's default method).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

TRUE_BETA = 0.15


@dataclass(frozen=True)
class Equation:
    name: str
    intercept: float
    coefs: tuple[tuple[str, float], ...] = ()
    noise_sd: float = 1.0
    formula: str = ""


@dataclass(frozen=True)
class Threshold:
    """``variable op quantile(variable, q)`` with op in ``<`` / ``>``."""

    variable: str
    op: str
    q: float = 0.5


@dataclass(frozen=True)
class ObservationRule:
    """P(observe ``variable``): first matching case wins, else ``otherwise``."""

    variable: str
    cases: tuple[tuple[tuple[Threshold, ...], float], ...] = ()
    otherwise: float = 1.0

    def probabilities(self, values: dict[str, np.ndarray], cutpoints: dict) -> np.ndarray:
        n = len(next(iter(values.values())))
        p = np.full(n, self.otherwise, dtype=float)
        decided = np.zeros(n, dtype=bool)
        for conditions, prob in self.cases:
            hit = np.ones(n, dtype=bool)
            for t in conditions:
                x = values[t.variable]
                cut = cutpoints[(t.variable, t.q)]
                hit &= (x < cut) if t.op == "<" else (x > cut)
            take = hit & ~decided
            p[take] = prob
            decided |= hit
        return p


@dataclass(frozen=True)
class DgpSpec:
    scenario: str
    outcome: str
    exposure: str
    covariates: tuple[str, ...]
    equations: tuple[Equation, ...]
    rules: tuple[ObservationRule, ...]
    unmeasured: tuple[str, ...] = ()
    true_beta: float = TRUE_BETA
    notes: tuple[str, ...] = field(default=())

    def __post_init__(self):
        defined: set[str] = set()
        for eq in self.equations:
            for parent, _ in eq.coefs:
                if parent not in defined:
                    raise ValueError(f"{eq.name} uses {parent} before it is defined")
            defined.add(eq.name)
        for rule in self.rules:
            if rule.variable not in defined:
                raise ValueError(f"observation rule for undefined variable {rule.variable}")
            for conditions, prob in rule.cases:
                if not 0.0 <= prob <= 1.0:
                    raise ValueError("probabilities must lie in [0, 1]")
                for t in conditions:
                    if t.variable not in defined:
                        raise ValueError(f"threshold on undefined variable {t.variable}")
            if not 0.0 <= rule.otherwise <= 1.0:
                raise ValueError("probabilities must lie in [0, 1]")

    @property
    def columns(self) -> tuple[str, ...]:
        return tuple(eq.name for eq in self.equations)

    @property
    def model_variables(self) -> tuple[str, ...]:
        return (self.outcome, self.exposure) + self.covariates

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Dataset:
    """Rectangular data: full (pre-masking) values plus an observed mask."""

    columns: tuple[str, ...]
    values: np.ndarray
    observed: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.observed.shape or self.values.shape[1] != len(self.columns):
            raise ValueError("values, observed and columns disagree in shape")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def index(self, name: str) -> int:
        return self.columns.index(name)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.index(name)]

    def observed_mask(self, name: str) -> np.ndarray:
        return self.observed[:, self.index(name)]

    def masked(self, names=None) -> np.ndarray:
        """Values with unobserved cells set to NaN, optionally for a subset of columns."""
        idx = [self.index(c) for c in (names or self.columns)]
        out = self.values[:, idx].copy()
        out[~self.observed[:, idx]] = np.nan
        return out

    def fully_observed(self) -> "Dataset":
        return Dataset(self.columns, self.values, np.ones_like(self.observed))


def generate(spec: DgpSpec, n: int, rng) -> Dataset:
    """Simulate ``n`` rows from ``spec``; ``rng`` is a seed or ``numpy.random.Generator``."""
    if n < 10:
        raise ValueError("n must be at least 10")
    rng = np.random.default_rng(rng)
    values: dict[str, np.ndarray] = {}
    for eq in spec.equations:
        x = np.full(n, eq.intercept, dtype=float)
        for parent, coef in eq.coefs:
            x = x + coef * values[parent]
        values[eq.name] = x + eq.noise_sd * rng.standard_normal(n)
    cutpoints = {}
    for rule in spec.rules:
        for conditions, _ in rule.cases:
            for t in conditions:
                key = (t.variable, t.q)
                if key not in cutpoints:
                    cutpoints[key] = float(np.quantile(values[t.variable], t.q))
    observed = np.ones((n, len(spec.columns)), dtype=bool)
    ruled = {r.variable: r for r in spec.rules}
    for j, name in enumerate(spec.columns):
        if name in spec.unmeasured:
            observed[:, j] = False
        elif name in ruled:
            p = ruled[name].probabilities(values, cutpoints)
            observed[:, j] = rng.random(n) < p
    data = np.column_stack([values[c] for c in spec.columns])
    return Dataset(spec.columns, data, observed)


# -- built-in mechanisms ------------------------------------------------------

_SQRT_HALF = math.sqrt(0.5)
_LT, _GT = "<", ">"


def _rule(variable: str, *cases, otherwise: float) -> ObservationRule:
    return ObservationRule(variable, tuple((tuple(c), p) for c, p in cases), otherwise)


def _below(v: str, q: float = 0.5) -> Threshold:
    return Threshold(v, _LT, q)


def _above(v: str, q: float = 0.5) -> Threshold:
    return Threshold(v, _GT, q)


def _two_variable() -> tuple[Equation, ...]:
    return (
        Equation("X", 1.0, (), _SQRT_HALF, "X ~ N(1, 0.5)"),
        Equation(
            "Y", 0.85, (("X", 0.15),), math.sqrt(0.5**2 - 0.15**2),
            "Y = 0.15 X + 0.85 + sqrt(0.5^2 - 0.15^2) eps",
        ),
    )


def _three_variable() -> tuple[Equation, ...]:
    return (
        Equation("W", 1.0, (), _SQRT_HALF, "W ~ N(1, 0.5)"),
        Equation(
            "X", 1 - _SQRT_HALF, (("W", _SQRT_HALF),), math.sqrt(0.5**2) * 0.5,
            "X = sqrt(0.5) W + (1 - sqrt(0.5)) + sqrt(0.5^2) * 0.5 * eps",
        ),
        Equation(
            "Y", 1.35, (("X", 0.15), ("W", -0.5)),
            math.sqrt(0.25 - (0.15**2 + 0.5**2 / 4 - 2 * 0.15 * 0.5 * math.sqrt(0.5 / 4))),
            "Y = 0.15 X - 0.5 W + 1.35 + sqrt(0.25 - (0.15^2 + 0.5^2/4 - 2*0.15*0.5*sqrt(0.5/4))) eps",
        ),
    )


def _fig5b_equations() -> tuple[Equation, ...]:
    u_coef = math.sqrt(2 * (0.25 - (0.15**2 / 4 + 0.5**2 / 4 - 2 * 0.15 * 0.5 * math.sqrt(0.5) / 4)))
    noise = 0.5 * math.sqrt(2 * (0.25 - (0.15**2 / 4 + 0.5**2 / 4 - 2 * 0.15 * 0.5 * math.sqrt(0.5 / 4))))
    return (
        Equation("W", 1.0, (), _SQRT_HALF, "W ~ N(1, 0.5)"),
        Equation("U", 1.0, (), _SQRT_HALF, "U ~ N(1, 0.5)"),
        Equation(
            "X", 1 - _SQRT_HALF, (("W", _SQRT_HALF),), _SQRT_HALF * 0.5,
            "X = sqrt(0.5) W + (1 - sqrt(0.5)) + sqrt(0.5) * 0.5 * eps",
        ),
        Equation(
            "Y", 2.0, (("X", 0.15), ("W", -0.5), ("U", -u_coef)), noise,
            "Y = 0.15 X - 0.5 W + 2 - U sqrt(2(0.25 - (0.15^2/4 + 0.5^2/4 - 2*0.15*0.5*sqrt(0.5)/4)))"
            " + 0.5 sqrt(2(0.25 - (0.15^2/4 + 0.5^2/4 - 2*0.15*0.5*sqrt(0.5/4)))) eps",
        ),
    )


_NORMAL_NOTE = "N(a, b) is read as mean a, variance b."


def _builtin() -> dict[str, DgpSpec]:
    both_low_high = lambda target, a, b: _rule(  # noqa: E731
        target, ((_below(a), _below(b)), 0.9), ((_above(a), _above(b)), 0.1), otherwise=0.5
    )
    specs = [
        DgpSpec(
            "fig1a", "Y", "X", (), _two_variable(),
            (
                _rule("X", otherwise=0.5),
                _rule("Y", ((_below("X"),), 0.9), otherwise=0.1),
            ),
            notes=(
                _NORMAL_NOTE,
                "Mirror of the fig1b mechanism so that X causes missingness in Y: "
                "P(observe Y) = 0.9 if X < median(X) else 0.1; P(observe X) = 0.5.",
            ),
        ),
        DgpSpec(
            "fig1b", "Y", "X", (), _two_variable(),
            (
                _rule("X", ((_below("Y"),), 0.9), otherwise=0.1),
                _rule("Y", otherwise=0.5),
            ),
            notes=(_NORMAL_NOTE,),
        ),
        DgpSpec(
            "fig4", "Y", "X", ("W",), _three_variable(),
            (
                _rule("X", ((_below("W"),), 0.9), otherwise=0.1),
                _rule("W", ((_below("X"),), 0.9), otherwise=0.1),
                _rule("Y", otherwise=0.5),
            ),
            notes=(_NORMAL_NOTE,),
        ),
        DgpSpec(
            "fig5a", "Y", "X", ("W",), _three_variable(),
            (
                both_low_high("W", "X", "Y"),
                _rule("X", otherwise=1.0),
                both_low_high("Y", "X", "W"),
            ),
            notes=(_NORMAL_NOTE,),
        ),
        DgpSpec(
            "fig5b", "Y", "X", ("W",), _fig5b_equations(),
            (
                _rule("X", otherwise=1.0),
                both_low_high("W", "X", "U"),
                both_low_high("Y", "X", "W"),
            ),
            unmeasured=("U",),
            notes=(_NORMAL_NOTE,),
        ),
        DgpSpec(
            "fig5c", "Y", "X", ("W",), _three_variable(),
            (
                _rule("X", ((_above("W", 0.7),), 0.8), otherwise=0.4),
                _rule("W", ((_below("Y"),), 0.9), otherwise=0.1),
                _rule("Y", ((_below("W"),), 0.9), otherwise=0.1),
            ),
            notes=(_NORMAL_NOTE,),
        ),
    ]
    return {s.scenario: s for s in specs}


DGPS: dict[str, DgpSpec] = _builtin()


def get_dgp(scenario: str) -> DgpSpec:
    try:
        return DGPS[scenario]
    except KeyError:
        raise KeyError(f"no data-generating mechanism for {scenario!r}; available: {', '.join(sorted(DGPS))}") from None
