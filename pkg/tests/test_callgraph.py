import random

from hypothesis import given, settings, strategies as st

from valuectx.callgraph import (
    CallEdge, build_cha, build_context_callgraph, clean_methods, count_k_paths,
    delta_percent, enumerate_paths, export_dot, path_lines,
)
from valuectx.engine import do_analysis
from valuectx.generate import GenConfig, pointer_program, scalar_program
from valuectx.parser import parse_program
from valuectx.pta import PointsToAnalysis
from valuectx.scalar_clients import SignAnalysis


def ctx_graph(p, client=PointsToAnalysis):
    return build_context_callgraph(do_analysis(client(p), p))


def test_mutrec_context_graph(mutrec):
    cg = ctx_graph(mutrec, SignAnalysis)
    assert cg.nodes == ["X0", "X1", "X2", "X3"]
    assert [(e.source, e.site, e.target) for e in cg.edges] == [
        ("X0", "c1", "X1"), ("X0", "c4", "X2"), ("X1", "c2", "X2"),
        ("X2", "c3", "X3"), ("X3", "c2", "X2")]


def test_call_free_program():
    p = parse_program("method main() {\n  n1: x = 1\n}")
    cg = ctx_graph(p, SignAnalysis)
    assert cg.nodes == ["X0"] and cg.edges == []
    dot = export_dot(cg)
    assert dot.splitlines()[0] == "digraph callgraph {" and dot.count("[label=") == 1


def test_cha_mutrec(mutrec):
    cha = build_cha(mutrec)
    assert {(e.source, e.target) for e in cha.edges} == {
        ("main", "f"), ("main", "g"), ("f", "g"), ("g", "f")}


def test_twoclass_pruning(twoclass):
    assert ctx_graph(twoclass).targets_at("X0", "s2") == ["B.m"]
    assert build_cha(twoclass).targets_at("main", "s2") == ["A.m", "B.m"]


def test_mutrec_path_counts(mutrec):
    cg = ctx_graph(mutrec, SignAnalysis)
    assert count_k_paths(cg, 0) == 1
    assert count_k_paths(cg, 1) == 2
    assert enumerate_paths(cg, 3) == {
        (("main", "c1", "f"), ("f", "c2", "g"), ("g", "c3", "f")),
        (("main", "c4", "g"), ("g", "c3", "f"), ("f", "c2", "g")),
    }


def test_poly_pruning(poly):
    cg, cha = ctx_graph(poly), build_cha(poly)
    for k in range(11):
        assert count_k_paths(cg, k) <= count_k_paths(cha, k)
    assert count_k_paths(cg, 2) < count_k_paths(cha, 2)


def test_path_lines(poly):
    lines = path_lines(ctx_graph(poly), build_cha(poly), 6)
    assert len(lines) == 6
    assert lines[0].startswith("k=1 fcpa=") and " cha=" in lines[0] and " delta=" in lines[0]
    assert delta_percent(3, 7) == "57.14" and delta_percent(0, 0) == "0.00"


def _graphs(seed):
    rng = random.Random(seed)
    if seed % 2:
        p = parse_program(pointer_program(rng))
        return ctx_graph(p), build_cha(p)
    p = parse_program(scalar_program(rng, GenConfig(recursive=True)))
    return ctx_graph(p, SignAnalysis), build_cha(p)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 6))
def test_dp_matches_enumeration(seed, k):
    for cg in _graphs(seed):
        assert count_k_paths(cg, k) == len(enumerate_paths(cg, k))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_context_paths_project_into_cha(seed):
    cg, cha = _graphs(seed)
    for k in range(5):
        assert enumerate_paths(cg, k) <= enumerate_paths(cha, k)
        assert count_k_paths(cg, k) <= count_k_paths(cha, k)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.data())
def test_adding_an_edge_never_decreases(seed, data):
    _, cha = _graphs(seed)
    nodes = cha.nodes
    src = data.draw(st.sampled_from(nodes))
    dst = data.draw(st.sampled_from(nodes))
    before = [count_k_paths(cha, k) for k in range(6)]
    cha.edges.append(CallEdge(src, "extra", dst))
    assert all(count_k_paths(cha, k) >= b for k, b in enumerate(before))


def test_clean_mutrec(mutrec):
    assert clean_methods(ctx_graph(mutrec, SignAnalysis)) == {"main", "f", "g"}


def test_clean_default_site(default_site):
    cg = ctx_graph(default_site)
    # main holds the unknown call; handler is only reachable through it
    assert clean_methods(cg) == {"Box.get"}
    assert any(e.is_default and e.target == "Node.handler" for e in cg.edges)


def test_dot_default_edges_dashed(default_site):
    dot = export_dot(ctx_graph(default_site))
    dashed = [line for line in dot.splitlines() if "style=dashed" in line]
    assert dashed and all("->" in line for line in dashed)
    assert export_dot(ctx_graph(default_site)) == dot


def test_cha_dot_uses_methods(mutrec):
    dot = export_dot(build_cha(mutrec))
    assert '"main" -> "f"' in dot and "X0" not in dot
