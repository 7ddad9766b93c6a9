"""Decide which missing-data strategies estimate the exposure coefficient without bias.

Three strategies are judged from an m-DAG:

* complete records analysis (CRA): unbiased when the outcome is
  d-separated from the indicators of incomplete analysis-model variables
  given the exposure and covariates;
* multiple imputation on the full sample: unbiased when the complete
  variables d-separate every measured incomplete variable from every
  response indicator (``phi`` is empty);
* subsample MI, restricting to units with observed ``Q`` and imputing the
  remaining incomplete variables ``P``: unbiased when (1) the outcome is
  d-separated from the indicators of ``Q`` given exposure and covariates
  and (2) within the subsample, every variable in ``P`` is d-separated
  from the indicators of ``P`` given the complete variables, ``Q`` and
  the indicators of ``Q``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from itertools import combinations

from .dsep import PathWitness, d_separated, open_paths, shortest_open_path
from .graph import MDag, Node, R, Status

DEFAULT_MAX_INCOMPLETE = 16

RANKING_DISCLAIMER = (
    "Options are ordered by how few variables are restricted to observed values. "
    "Actual subsample sizes depend on the data and cannot be read from the graph; "
    "compare candidate subsamples on your data before choosing."
)
AUXILIARY_SUGGESTION = (
    "No strategy is unbiased under this graph. Consider measured auxiliary variables "
    "that would block the open paths listed in the witnesses, or a different analysis approach."
)


class VerdictStatus(str, enum.Enum):
    UNBIASED = "unbiased"
    POSSIBLY_BIASED = "possibly_biased"


class EnumerationLimitError(ValueError):
    pass


@dataclass(frozen=True)
class Reason:
    """Why a strategy may be biased; path-based codes carry witnesses."""

    code: str
    message: str
    witnesses: tuple[PathWitness, ...] = ()

    def to_dict(self) -> dict:
        return {
            "code": self.code,
            "message": self.message,
            "witnesses": [w.to_dict() for w in self.witnesses],
        }


@dataclass(frozen=True)
class Verdict:
    status: VerdictStatus
    reasons: tuple[Reason, ...] = ()
    phi: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.status is VerdictStatus.POSSIBLY_BIASED and not self.reasons:
            raise ValueError("a possibly_biased verdict needs at least one reason")

    @property
    def unbiased(self) -> bool:
        return self.status is VerdictStatus.UNBIASED

    @property
    def witnesses(self) -> tuple[PathWitness, ...]:
        return tuple(w for r in self.reasons for w in r.witnesses)

    @property
    def codes(self) -> tuple[str, ...]:
        return tuple(r.code for r in self.reasons)


UNBIASED = Verdict(VerdictStatus.UNBIASED)


@dataclass(frozen=True)
class SubsampleSpec:
    """Partition of the measured incomplete variables.

    ``q`` is restricted to observed values, ``p`` is imputed.
    """

    q: tuple[str, ...]
    p: tuple[str, ...]

    def conditioning_set(self, g: MDag) -> tuple[Node, ...]:
        names = sorted(set(g.complete) | set(self.q))
        return tuple(Node(n) for n in names) + tuple(R(n) for n in self.q)


@dataclass(frozen=True)
class SubsampleOption:
    spec: SubsampleSpec
    verdict: Verdict
    inclusion_ok: bool
    subsample_mar_ok: bool
    annotations: tuple[str, ...] = ()
    # inclusion check with Z and Q as the conditioning set (alternative phrasing)
    inclusion_ok_alt: bool = True


@dataclass(frozen=True)
class SelfMissingnessWarning:
    flag: bool
    pattern: str = ""


@dataclass(frozen=True)
class StrategyReport:
    graph: MDag
    cra: Verdict
    full_mi: Verdict
    warning: SelfMissingnessWarning
    eligible_q: tuple[str, ...]
    options: tuple[SubsampleOption, ...]
    enumeration_complete: bool = True
    notes: tuple[str, ...] = field(default=())

    @property
    def phi(self) -> tuple[str, ...]:
        return self.full_mi.phi or ()

    @property
    def unbiased_options(self) -> tuple[SubsampleOption, ...]:
        return tuple(o for o in self.options if o.verdict.unbiased)

    @property
    def any_unbiased(self) -> bool:
        return self.cra.unbiased or self.full_mi.unbiased or bool(self.unbiased_options)


# -- helpers -----------------------------------------------------------------


def _analysis_conditioning(g: MDag) -> list[Node]:
    return [g.exposure] + [Node(w) for w in g.analysis.covariates]


def _complete_nodes(g: MDag) -> list[Node]:
    return [Node(n) for n in g.complete]


def _phi_within(g: MDag, p: tuple[str, ...], c: list[Node]) -> tuple[list[str], list[Reason]]:
    """Members of ``p`` d-connected to an indicator of ``p`` given ``c``, with witnesses."""
    targets = [R(k) for k in p]
    members: list[str] = []
    for v in p:
        if not d_separated(g, [Node(v)], targets, c):
            members.append(v)
    witnesses = []
    for v in members:
        w = shortest_open_path(g, Node(v), targets, c)
        assert w is not None
        witnesses.append(w)
    return members, witnesses


def _mar_reasons(members, witnesses, in_subsample: bool) -> tuple[Reason, ...]:
    given = "the complete variables, Q and the indicators of Q" if in_subsample else "the complete variables"
    return tuple(
        Reason(
            "open_path_to_indicator",
            f"{v} has an open path to a response indicator of an imputed variable given {given}",
            (w,),
        )
        for v, w in zip(members, witnesses)
    )


# -- public operations -------------------------------------------------------


def compute_phi(g: MDag) -> tuple[str, ...]:
    """MNAR-inducing measured variables: incomplete variables d-connected to some indicator given the complete ones."""
    members, _ = _phi_within(g, g.incomplete, _complete_nodes(g))
    return tuple(sorted(members))


def full_mi_verdict(g: MDag) -> Verdict:
    members, witnesses = _phi_within(g, g.incomplete, _complete_nodes(g))
    phi = tuple(sorted(members))
    if not phi:
        return Verdict(VerdictStatus.UNBIASED, phi=())
    return Verdict(VerdictStatus.POSSIBLY_BIASED, _mar_reasons(members, witnesses, False), phi=phi)


def cra_verdict(g: MDag) -> Verdict:
    """Complete records analysis: outcome independent of selection given exposure and covariates."""
    model = set(g.analysis.model_variables)
    targets = [R(j) for j in g.incomplete if j in model]
    if not targets:
        return UNBIASED
    cond = _analysis_conditioning(g)
    if d_separated(g, [g.outcome], targets, cond):
        return UNBIASED
    reasons = []
    for t in targets:
        paths = open_paths(g, g.outcome, t, cond)
        if paths:
            reasons.append(
                Reason(
                    "outcome_dependent_selection",
                    f"the outcome {g.outcome} is d-connected to {t} given the exposure and covariates",
                    tuple(paths),
                )
            )
    return Verdict(VerdictStatus.POSSIBLY_BIASED, tuple(reasons))


def eligible_q(g: MDag) -> tuple[str, ...]:
    """Incomplete variables whose indicator is d-separated from the outcome given exposure and covariates.

    Auxiliaries are deliberately not conditioned on: they are not in the analysis model.
    """
    cond = _analysis_conditioning(g)
    return tuple(j for j in g.incomplete if d_separated(g, [g.outcome], [R(j)], cond))


def _check_q(g: MDag, q) -> tuple[str, ...]:
    names = []
    for j in q:
        j = str(j)
        if not g.has_variable(j):
            raise KeyError(f"unknown variable {j!r}")
        status = g.variable(j).status
        if status is not Status.INCOMPLETE:
            raise ValueError(f"{j!r} is {status.value}; only measured incomplete variables can be restricted to observed")
        names.append(j)
    return tuple(sorted(set(names)))


def subsample_verdict(g: MDag, q=()) -> SubsampleOption:
    """Judge MI of the remaining incomplete variables among units with observed ``q``."""
    q = _check_q(g, q)
    p = tuple(j for j in g.incomplete if j not in q)
    spec = SubsampleSpec(q, p)
    reasons: list[Reason] = []

    cond = _analysis_conditioning(g)
    inclusion_ok = True
    for j in q:
        paths = open_paths(g, g.outcome, R(j), cond)
        if paths:
            inclusion_ok = False
            reasons.append(
                Reason(
                    "outcome_dependent_subsample",
                    f"inclusion in the subsample depends on the outcome through {R(j)}",
                    tuple(paths),
                )
            )

    c = list(spec.conditioning_set(g))
    members, witnesses = _phi_within(g, p, c)
    reasons.extend(_mar_reasons(members, witnesses, bool(q)))

    alt_cond = [Node(n) for n in sorted(set(g.complete) | set(q))]
    alt_ok = all(d_separated(g, [g.outcome], [R(j)], alt_cond) for j in q)

    status = VerdictStatus.POSSIBLY_BIASED if reasons else VerdictStatus.UNBIASED
    return SubsampleOption(
        spec=spec,
        verdict=Verdict(status, tuple(reasons), phi=tuple(sorted(members))),
        inclusion_ok=inclusion_ok,
        subsample_mar_ok=not members,
        annotations=_annotate(g, spec),
        inclusion_ok_alt=alt_ok,
    )


def _annotate(g: MDag, spec: SubsampleSpec) -> tuple[str, ...]:
    out = []
    model_incomplete = {j for j in g.incomplete if j in g.analysis.model_variables}
    if not spec.q:
        out.append("full_sample")
    if not spec.p or (spec.q and model_incomplete <= set(spec.q)):
        out.append("cra_equivalent")
    if spec.p == (g.analysis.outcome,) and not g.analysis.auxiliaries:
        out.append("no_efficiency_gain_vs_cra")
    return tuple(out)


def _rank_key(opt: SubsampleOption):
    return (not opt.verdict.unbiased, len(opt.spec.q), opt.spec.q)


def enumerate_subsamples(
    g: MDag, max_incomplete: int = DEFAULT_MAX_INCOMPLETE, include_ineligible: bool = False
) -> tuple[SubsampleOption, ...]:
    """Evaluate every candidate ``Q`` and rank the results.

    Candidates are the subsets of :func:`eligible_q` (all subsets of the
    incomplete variables with ``include_ineligible``).  Unbiased options
    come first, by ascending ``|Q|`` then name order; the empty ``Q``
    is MI on the full sample.
    """
    if len(g.incomplete) > max_incomplete:
        raise EnumerationLimitError(
            f"{len(g.incomplete)} incomplete variables exceed the enumeration limit of {max_incomplete}; "
            "pass an explicit Q instead"
        )
    pool = g.incomplete if include_ineligible else eligible_q(g)
    options = [subsample_verdict(g, q) for k in range(len(pool) + 1) for q in combinations(pool, k)]
    options.sort(key=_rank_key)
    valid = [set(o.spec.q) for o in options if o.verdict.unbiased]
    ranked = []
    for o in options:
        if o.verdict.unbiased and any(v < set(o.spec.q) for v in valid):
            o = replace(o, annotations=o.annotations + ("superset_of_valid_option",))
        ranked.append(o)
    return tuple(ranked)


def y_self_missingness_warning(g: MDag) -> SelfMissingnessWarning:
    y = g.analysis.outcome
    if g.variable(y).status is not Status.INCOMPLETE:
        return SelfMissingnessWarning(False)
    ry = R(y)
    parents = g.parents(ry)
    if Node(y) in parents:
        return SelfMissingnessWarning(True, f"{y} directly causes its own missingness ({y} -> {ry})")
    shared = sorted(
        u for u in g.unmeasured if Node(u) in parents and Node(u) in g.parents(Node(y))
    )
    if shared:
        u = shared[0]
        return SelfMissingnessWarning(
            True, f"unmeasured {u} causes both {y} and its missingness ({y} <- {u} -> {ry})"
        )
    return SelfMissingnessWarning(False)


def analyze(g: MDag, max_incomplete: int = DEFAULT_MAX_INCOMPLETE) -> StrategyReport:
    """Run every check and assemble a :class:`StrategyReport`."""
    notes = [RANKING_DISCLAIMER]
    complete = True
    try:
        options = enumerate_subsamples(g, max_incomplete)
    except EnumerationLimitError as exc:
        complete = False
        options = (subsample_verdict(g, ()),)
        notes.append(f"Subsample enumeration skipped: {exc}")
    report = StrategyReport(
        graph=g,
        cra=cra_verdict(g),
        full_mi=full_mi_verdict(g),
        warning=y_self_missingness_warning(g),
        eligible_q=eligible_q(g),
        options=options,
        enumeration_complete=complete,
    )
    disagree = [o for o in options if o.inclusion_ok != o.inclusion_ok_alt]
    if disagree:
        qs = "; ".join("{" + ", ".join(o.spec.q) + "}" for o in disagree)
        notes.append(
            "The outcome-independence check for Q uses the exposure and covariates as the conditioning set. "
            f"Conditioning on the complete variables and Q instead gives a different answer for Q = {qs}."
        )
    if report.warning.flag:
        notes.append(
            "The outcome may cause its own missingness; CRA and MI in any subsample are then typically biased "
            "for a linear regression coefficient (some models, such as logistic regression, are exceptions)."
        )
    if not report.any_unbiased:
        notes.append(AUXILIARY_SUGGESTION)
    return replace(report, notes=tuple(notes))
