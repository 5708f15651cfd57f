import random

import pytest
from hypothesis import given, settings, strategies as st

from valuectx.engine import do_analysis
from valuectx.generate import pointer_program
from valuectx.ir import Cast, Copy, Load, New, NullAssign, StaticLoad, StaticStore, Store
from valuectx.parser import parse_program
from valuectx.pta import (
    NULL, SUMMARY, GlobalGraph, PointsToAnalysis, PointsToGraph, format_graph, gc,
    graph_leq, graph_meet, pta_call_entry, pta_call_exit, pta_call_local,
    pta_default_site, pta_diagnostics, pta_resolve_targets, pta_transfer,
)

PROGRAM = """
class A {
  field f
  field n
  static field s
  method m(p) {
    a1: r = p
    a2: return r
  }
}
class B extends A {
  method m(p) {
    b1: r = this
    b2: return r
  }
}
class C {
  field f
}
extern method ext(q)
method main() {
  o1: a = new A
  o2: b = new B
  o3: c = new C
  c1: x = vcall a.m(c)
  c2: y = call ext(a)
  c3: z = vcall b.m(a)
}
"""


@pytest.fixture
def prog():
    return parse_program(PROGRAM)


def G(vars=None, heap=None):
    return PointsToGraph(vars, heap)


def step(p, stmt, g, glob=None, label=None):
    return pta_transfer(p, stmt, g, glob or GlobalGraph(), label)


def test_load(prog):
    g = G({"y": {"o1"}}, {("o1", "n"): {"o2"}})
    assert step(prog, Load("x", "y", "n"), g).pts("x") == {"o2"}


def test_copy_summary(prog):
    assert step(prog, Copy("x", "y"), G({"y": {SUMMARY}})).pts("x") == {SUMMARY}


def test_store_summary_weak(prog):
    g = G({"x": {"o1"}, "y": {SUMMARY}}, {("o1", "f"): {"o3"}})
    out = step(prog, Store("x", "f", "y"), g)
    assert out.field("o1", "f") == {"o3", SUMMARY}


def test_load_through_summary(prog):
    g = G({"y": {SUMMARY, "o1"}}, {("o1", "f"): {"o2"}})
    assert step(prog, Load("x", "y", "f"), g).pts("x") == {SUMMARY, "o2"}


def test_new_is_strong(prog):
    out = step(prog, New("x", "A"), G({"x": {"o2"}}), label="m3")
    assert out.pts("x") == {"m3"}
    with pytest.raises(ValueError):
        step(prog, New("x", "A"), G())


def test_null_then_gc(prog):
    g = G({"x": {"o1"}}, {("o1", "f"): {"o2"}})
    g = step(prog, NullAssign("x"), g)
    g = step(prog, Copy("y", "x"), g)
    assert g.pts("y") == {NULL}
    assert "o1" not in g.sites() and g.heap == {}


def test_cast_filters(prog):
    g = G({"y": {"o1", "o2", "o3", SUMMARY, NULL}})
    assert step(prog, Cast("x", "B", "y"), g).pts("x") == {"o2", SUMMARY, NULL}
    assert step(prog, Cast("x", "A", "y"), g).pts("x") == {"o1", "o2", SUMMARY, NULL}


def test_statics_go_global(prog):
    glob = GlobalGraph()
    g = G({"v": {"o1"}}, {("o1", "f"): {"o3"}})
    step(prog, StaticStore("B", "s", "v"), g, glob)
    assert glob.statics[("A", "s")] == {"o1"}
    out = step(prog, StaticLoad("w", "A", "s"), G(), glob)
    assert out.pts("w") == {"o1"} and out.field("o1", "f") == {"o3"}


def test_call_entry_restricts_heap(prog):
    main, m = prog.method("main"), prog.method("A.m")
    g = G({"c": {"o1"}, "a": {"o1"}, "z": {"o3"}},
          {("o1", "f"): {"o2"}, ("o3", "f"): {"o3"}})
    entry = pta_call_entry(prog, m, main.node("c1"), g)
    assert entry.pts("p") == {"o1"} and entry.pts("this") == {"o1"}
    assert entry.field("o1", "f") == {"o2"} and "o3" not in entry.sites()


def test_call_entry_summary_and_arity(prog):
    main = prog.method("main")
    entry = pta_call_entry(prog, prog.method("A.m"), main.node("c1"), G({"c": {SUMMARY}}))
    assert entry.pts("p") == {SUMMARY}
    with pytest.raises(ValueError):
        pta_call_entry(prog, prog.method("main"), main.node("c1"), G())


def test_call_exit(prog):
    node = prog.method("main").node("c1")
    m = prog.method("A.m")
    out = pta_call_exit(m, node, G({"r": {"o9"}}, {("o9", "f"): {"o3"}}))
    assert out.pts("x") == {"o9"} and out.field("o9", "f") == {"o3"}
    assert pta_call_exit(m, node, G()).pts("x") == frozenset()
    assert pta_call_exit(m, node, G({"r": {SUMMARY}})).pts("x") == {SUMMARY}


def test_call_local(prog):
    node = prog.method("main").node("c1")
    g = G({"a": {"o1"}, "c": {"o3"}, "z": {"o2"}, "x": {"o1"}},
          {("o3", "f"): {"o3"}, ("o2", "f"): {"o1"}})
    out = pta_call_local(prog, node, g, [prog.method("A.m")])
    assert out.pts("x") == frozenset()
    assert out.pts("z") == {"o2"} and out.pts("c") == {"o3"}
    # o1 (receiver) and o3 (argument) travel through the callee
    assert out.heap == {("o2", "f"): frozenset({"o1"})}


def test_default_site(prog):
    node = prog.method("main").node("c2")
    g = G({"a": {"o1"}}, {("o1", "n"): {"o2"}})
    out = pta_default_site(prog, node, g)
    assert out.pts("y") == {SUMMARY}
    assert out.field("o1", "f") == {SUMMARY}
    assert out.field("o1", "n") == {"o2", SUMMARY}
    assert out.field("o2", "f") == {SUMMARY}
    null_only = pta_default_site(prog, node, G({"a": {NULL}}))
    assert null_only.heap == {} and null_only.pts("y") == {SUMMARY}


def test_resolve_targets(prog, twoclass):
    main = prog.method("main")
    node = main.node("c3")
    res = pta_resolve_targets(prog, node, G({"b": {"o2"}}))
    assert res.targets == ("B.m",) and not res.is_default
    assert pta_resolve_targets(prog, node, G({"b": {SUMMARY}})).is_default
    res = pta_resolve_targets(prog, node, G({"b": {NULL}}))
    assert res.targets == () and not res.is_default
    assert pta_resolve_targets(prog, main.node("c2"), G()).is_default


def test_twoclass_target(twoclass):
    result = do_analysis(PointsToAnalysis(twoclass), twoclass)
    assert result.contexts[0].resolutions["s2"].targets == ("B.m",)
    assert result.contexts[0].out_values["s2"].pts("y") == {"s1"}


def test_diagnostic_on_unbound_receiver():
    p = parse_program("""
class A {
  method m() {
    a1: r = this
    a2: return r
  }
}
method main() {
  n1: x = 1
  n2: y = vcall x.m()
}
""")
    diags = pta_diagnostics(do_analysis(PointsToAnalysis(p), p))
    assert len(diags) == 1 and diags[0].label == "n2"


def test_format():
    assert format_graph(G()) == "T"
    assert format_graph(G({"x": {"o1"}}, {("o1", "f"): {SUMMARY}})) == "x -> {o1}; o1.f -> {BOT}"


sites = st.sampled_from(["o1", "o2", "o3", SUMMARY, NULL])
graphs = st.builds(
    G,
    st.dictionaries(st.sampled_from("abxy"), st.frozensets(sites, max_size=3)),
    st.dictionaries(st.tuples(st.sampled_from(["o1", "o2", "o3"]), st.sampled_from("fg")),
                    st.frozensets(sites, max_size=3)),
)


@given(graphs, graphs, graphs)
def test_meet_laws(a, b, c):
    assert graph_meet(a, b) == graph_meet(b, a)
    assert graph_meet(a, graph_meet(b, c)) == graph_meet(graph_meet(a, b), c)
    assert graph_meet(a, a) == a and graph_meet(a, G()) == a
    assert graph_leq(graph_meet(a, b), a)


def _brute_reachable(g):
    seen, stack = set(), [s for v in g.vars.values() for s in v]
    while stack:
        s = stack.pop()
        if s in seen:
            continue
        seen.add(s)
        stack += [t for (o, _), ts in g.heap.items() if o == s for t in ts]
    return seen


@given(graphs)
def test_gc(g):
    once = gc(g)
    assert gc(once) == once
    keep = _brute_reachable(g)
    assert {o for o, _ in once.heap} == {o for o, _ in g.heap if o in keep}


@given(graphs, graphs, st.sampled_from([
    Copy("x", "a"), Load("x", "a", "f"), Store("a", "f", "b"), NullAssign("a"),
    Cast("x", "B", "a"), Store("x", "g", "y")]))
def test_transfer_monotone(small, extra, stmt):
    p = parse_program(PROGRAM)
    big = graph_meet(small, extra)
    assert graph_leq(step(p, stmt, big), step(p, stmt, small))


@given(graphs)
def test_summary_absorbs_through_copies(g):
    p = parse_program(PROGRAM)
    g = graph_meet(g, G({"a": {SUMMARY}}))
    for stmt in (Copy("b", "a"), Copy("x", "b"), Copy("y", "x")):
        g = step(p, stmt, g)
    assert SUMMARY in g.pts("y")


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_cast_results_respect_subtypes(seed):
    from valuectx.ir import subtypes
    p = parse_program(pointer_program(random.Random(seed)))
    result = do_analysis(PointsToAnalysis(p), p)
    for ctx in result.reachable_contexts():
        for n in ctx.method.nodes:
            if isinstance(n.stmt, Cast):
                ok = subtypes(p, n.stmt.class_name)
                for s in ctx.value_after(n.label).pts(n.stmt.target):
                    assert s in (SUMMARY, NULL) or p.allocation_sites[s] in ok
