import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdagmi import catalog
from mdagmi.graph import AnalysisSpec, CycleError, GraphError, Node, R, Role, Status, build

from oracles import random_mdag

XY = AnalysisSpec(exposure="X", outcome="Y")


def _incomplete(*names):
    return [(n, None, "incomplete") for n in names]


def test_fig1a_build_synthesizes_indicators():
    g = build(_incomplete("X", "Y"), [("X", "Y"), ("X", "R[Y]")], XY)
    assert set(g.nodes) == {Node("X"), Node("Y"), R("X"), R("Y")}
    assert g.parents(R("X")) == frozenset()


def test_single_complete_variable_has_no_indicator():
    g = build([("Y", None, "complete"), ("X", None, "complete")], [], XY)
    assert g.indicators == ()
    assert len(g.nodes) == 2


def test_two_cycle_is_rejected_and_named():
    with pytest.raises(CycleError) as err:
        build(_incomplete("X", "Y"), [("X", "Y"), ("Y", "X")], XY)
    assert set(err.value.cycle) == {Node("X"), Node("Y")}


@pytest.mark.parametrize(
    "variables, edges, analysis, fragment",
    [
        (_incomplete("X", "Y", "X"), [], XY, "duplicate variable"),
        ([("X", None, "complete"), ("Y", None, "incomplete")], [("Y", "R[X]")], XY, "X"),
        ([("X", None, "incomplete"), ("Y", None, "incomplete"), ("U", None, "unmeasured")], [("U", "R[U]")], XY, "U"),
        (_incomplete("X", "Y"), [("R[X]", "Y")], XY, "indicator"),
        (_incomplete("X", "Y"), [("X", "X")], XY, "self"),
        (_incomplete("X", "Y"), [("X", "Y"), ("X", "Y")], XY, "duplicate edge"),
        (_incomplete("X", "Y"), [("X", "Q")], XY, "Q"),
        ([("X", None, "incomplete"), ("Y", None, "unmeasured")], [], XY, "unmeasured"),
        (_incomplete("X"), [], XY, "Y"),
        ([("X", "outcome", "incomplete"), ("Y", None, "incomplete")], [], XY, "role"),
    ],
)
def test_build_rejections(variables, edges, analysis, fragment):
    with pytest.raises(GraphError) as err:
        build(variables, edges, analysis)
    assert fragment.lower() in str(err.value).lower()


def test_analysis_roles_must_be_disjoint():
    with pytest.raises((GraphError, ValueError)):
        build(_incomplete("X", "Y"), [], AnalysisSpec("X", "X"))
    with pytest.raises((GraphError, ValueError)):
        build(_incomplete("X", "Y", "W"), [], AnalysisSpec("X", "Y", ("W",), ("W",)))


def test_parents_examples():
    assert catalog.graph("fig1b").parents("R[X]") == {Node("Y")}
    assert catalog.graph("fig4").parents("R[W]") == {Node("X")}
    assert catalog.graph("fig1b").parents("X") == frozenset()


def test_unknown_node_raises():
    g = catalog.graph("fig1a")
    with pytest.raises(KeyError):
        g.parents("nope")
    with pytest.raises(KeyError):
        g.ancestors("R[nope]")


def test_ancestors_chain_and_sink():
    g = build(_incomplete("X", "Y"), [("X", "Y"), ("Y", "R[Y]")], XY)
    assert g.ancestors("R[Y]") == {Node("X"), Node("Y")}
    assert g.descendants("R[Y]") == frozenset()


def test_fig5b_descendants_of_u():
    g = catalog.graph("fig5b")
    assert g.descendants("U") == {Node("Y"), R("W")} | set(g.descendants("Y"))
    # by hand from the edge list: Y is a sink, so only Y and R_W
    assert g.descendants("U") == {Node("Y"), R("W")}


def test_resolve_spellings_agree():
    g = catalog.graph("fig1a")
    assert g.resolve("R[Y]") == g.resolve("M[Y]") == g.resolve("R_Y") == R("Y")
    assert str(R("Y")) == "R_Y"


def test_roles_and_statuses():
    g = catalog.graph("figS1")
    assert g.variable("A").role is Role.AUXILIARY
    assert g.variable("X").status is Status.COMPLETE
    assert g.exposure == Node("X") and g.outcome == Node("Y")


def test_graphs_compare_structurally():
    a = catalog.graph("fig1a")
    b = build(_incomplete("X", "Y"), [("X", "R[Y]"), ("X", "Y")], XY, name="fig1a")
    assert a == b and hash(a) == hash(b)


@settings(max_examples=200, deadline=None)
@given(st.randoms(use_true_random=False))
def test_random_graph_invariants(rnd: random.Random):
    g = random_mdag(rnd)
    for j in g.incomplete:
        assert R(j) in g.nodes
        assert g.children(R(j)) == frozenset()
    assert {n.name for n in g.indicators} == set(g.incomplete)
    order = {n: i for i, n in enumerate(g.topological_order())}
    assert len(order) == len(g.nodes)
    for u, v in g.edges:
        assert order[u] < order[v]
    for u in g.nodes:
        for v in g.ancestors(u):
            assert u in g.descendants(v)
        assert u not in g.ancestors(u)
