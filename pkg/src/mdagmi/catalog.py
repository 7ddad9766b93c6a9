"""Built-in scenarios with their expected verdicts.

Each scenario is an embedded ``.mdag`` document (``mdagmi/scenarios``)
plus the verdicts the graph should produce.  ``subsamples`` maps a
restricted set ``Q`` to the expected status; sets not listed are not
asserted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

from .dsl import parse
from .graph import MDag

U, B = "unbiased", "possibly_biased"


@dataclass(frozen=True)
class Expected:
    phi: frozenset[str]
    cra: str
    full_mi: str
    subsamples: dict = field(default_factory=dict)
    warning: bool = False
    any_valid: bool = True


@dataclass(frozen=True)
class Scenario:
    id: str
    document: str
    expected: Expected
    note: str

    @property
    def graph(self) -> MDag:
        return parse(self.document)


def _q(*names: str) -> frozenset[str]:
    return frozenset(names)


_EXPECTED: dict[str, tuple[Expected, str]] = {
    "fig1a": (
        Expected(_q("X", "Y"), U, B, {_q("X"): U, _q("Y"): U}),
        "Two incomplete variables; X causes missingness in Y. CRA unbiased, full-sample MI not; "
        "either variable may be the observed-restricted one.",
    ),
    "fig1b": (
        Expected(_q("X", "Y"), B, B, {_q("Y"): U, _q("X"): B}),
        "Y causes missingness in X. CRA and full-sample MI biased; impute X among units with observed Y.",
    ),
    "fig4": (
        Expected(_q("W", "X", "Y"), U, B, {_q("X"): U, _q("W"): U, _q("W", "X"): U, _q("Y"): B}),
        "Confounder W and exposure X cause each other's missingness. Restricting to observed X, "
        "observed W, or both is valid; restricting to observed Y is not.",
    ),
    "fig5a": (
        Expected(_q("W", "Y"), B, B, {_q("Y"): U, _q("W"): B}),
        "Restricting to observed outcome is valid; restricting to observed W is not.",
    ),
    "fig5b": (
        Expected(_q("W", "Y"), B, B, {_q("Y"): B, _q("W"): B}, any_valid=False),
        "Conditioning on observed Y opens W -> Y <- U -> R_W; no subsample is valid.",
    ),
    "fig5c": (
        Expected(_q("W", "X", "Y"), B, B, {_q("X", "Y"): U, _q("Y"): B, _q("X"): B, _q("W"): B}),
        "Both X and Y must be restricted to observed values before imputing W.",
    ),
    "figS1": (
        # Q={Y} leaves only the auxiliary to impute; its self-caused missingness fails the
        # within-subsample check, and the restriction is the CRA sample anyway.
        Expected(_q("A", "Y"), U, B, {_q("A"): B, _q("Y"): B}),
        "Incomplete auxiliary A causes its own missingness: including it makes full-sample MI invalid.",
    ),
    "fig2_motivating": (
        Expected(
            _q("IQ15", "SEP", "eduscore", "smoking"), U, B,
            {_q("SEP", "smoking"): U, _q("SEP"): B},
        ),
        "Smoking and SEP cause missingness; imputing IQ15 and eduscore among units with observed "
        "smoking and SEP is valid, observed SEP alone is not.",
    ),
    "mb_a": (
        Expected(frozenset(), U, U, {_q(): U}),
        "All missingness caused by the complete Z1: full-sample MI is valid.",
    ),
    "mb_b": (
        Expected(_q("X", "Y", "Z2"), U, B, {_q("X", "Z2"): U, _q("X"): B, _q("Z2"): B, _q("Y"): B}),
        "Valid only within the subsample with observed X and Z2.",
    ),
    "mb_c": (
        Expected(_q("X", "Y", "Z2"), B, B, {_q("Y"): B}, any_valid=False),
        "Y causes missingness in X and Z2; no strategy is valid.",
    ),
    "mb_d": (
        Expected(_q("X", "Y", "Z2"), U, B, {_q("X", "Z2"): U, _q("X"): B, _q("Z2"): B}),
        "X and Z2 cause their own missingness; valid within the subsample with observed X and Z2.",
    ),
    "mb_e": (
        Expected(_q("X", "Y", "Z2"), U, B, {_q("X", "Z2"): U}),
        "Valid only within the subsample with observed X and Z2.",
    ),
    "mb_f": (
        Expected(_q("X", "Y", "Z2"), B, B, {_q("Y"): B}, any_valid=False),
        "Y causes missingness in X and Z2; within observed Y, X and Z2 still cause their own missingness.",
    ),
    "mb_g": (
        Expected(_q("X", "Y", "Z2"), B, B, {}, warning=True, any_valid=False),
        "Y causes its own missingness; neither MI nor CRA is valid.",
    ),
    "mb_h": (
        Expected(_q("X", "Y", "Z2"), B, B, {}, warning=True, any_valid=False),
        "Y causes its own missingness and that of X and Z2; nothing is valid.",
    ),
}
_EXPECTED["fig3a"] = (_EXPECTED["fig1a"][0], "Same graph as fig1a, used for the worked algorithm steps.")
_EXPECTED["fig3b"] = (_EXPECTED["fig1b"][0], "Same graph as fig1b, used for the worked algorithm steps.")

# scenarios with a built-in data-generating mechanism
SIMULABLE = ("fig1a", "fig1b", "fig4", "fig5a", "fig5b", "fig5c")


def ids() -> list[str]:
    """Sorted scenario ids."""
    return sorted(_EXPECTED)


list_ids = ids


def document(scenario_id: str) -> str:
    if scenario_id not in _EXPECTED:
        raise KeyError(f"unknown scenario {scenario_id!r}; known: {', '.join(ids())}")
    return resources.files("mdagmi.scenarios").joinpath(f"{scenario_id}.mdag").read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def get(scenario_id: str) -> Scenario:
    text = document(scenario_id)
    expected, note = _EXPECTED[scenario_id]
    return Scenario(scenario_id, text, expected, note)


def graph(scenario_id: str) -> MDag:
    return get(scenario_id).graph
