import random

from hypothesis import given, settings, strategies as st

from valuectx.callgraph import build_cha
from valuectx.generate import GenConfig, pointer_program, scalar_program
from valuectx.ir import validate
from valuectx.parser import parse_program


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_scalar_programs_within_bounds(seed):
    cfg = GenConfig()
    p = parse_program(scalar_program(random.Random(seed), cfg))
    methods = list(p.all_methods())
    assert len(methods) <= cfg.max_methods
    for m in methods:
        assert len(m.nodes) - 2 <= cfg.max_nodes + 1  # body plus the return
        assert len(m.call_nodes) <= cfg.max_calls
    assert not [d for d in validate(p) if d.severity == "error"]


def _cyclic(cha):
    adj = {}
    for e in cha.edges:
        adj.setdefault(e.source, set()).add(e.target)
    state = {}

    def visit(n):
        state[n] = 1
        for t in adj.get(n, ()):
            if state.get(t) == 1 or (t not in state and visit(t)):
                return True
        state[n] = 2
        return False

    return visit(cha.entry)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_recursion_flag(seed):
    rng = random.Random(seed)
    assert not _cyclic(build_cha(parse_program(scalar_program(rng))))
    assert _cyclic(build_cha(parse_program(scalar_program(rng, GenConfig(recursive=True)))))


def test_same_seed_same_program():
    assert scalar_program(random.Random(7)) == scalar_program(random.Random(7))
    assert pointer_program(random.Random(7)) == pointer_program(random.Random(7))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_pointer_programs_parse(seed):
    p = parse_program(pointer_program(random.Random(seed)))
    assert p.entry_method.ref == "main"
    assert set(p.class_map) >= {"A", "B", "C"}
