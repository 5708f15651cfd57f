import pytest

from valuectx.ir import (
    DispatchError, IRError, lookup_dispatch, reverse_postorder, subtypes, validate,
)
from valuectx.parser import parse_program, parse_unchecked

HIERARCHY = """
class A {
  field f
  method m() {
    a1: r = this
    a2: return r
  }
  method k() {
    a3: r = this
    a4: return r
  }
}
class B extends A {
  field g
  method m() {
    b1: r = this
    b2: return r
  }
}
class C extends A {}
class D extends B {}
method main() {
  n1: x = new D
}
"""


@pytest.fixture
def hier():
    return parse_program(HIERARCHY)


def test_lookup_override_and_inheritance(hier):
    assert lookup_dispatch(hier, "B", "m") == "B.m"
    assert lookup_dispatch(hier, "B", "k") == "A.k"
    assert lookup_dispatch(hier, "D", "m") == "B.m"
    with pytest.raises(DispatchError):
        lookup_dispatch(hier, "A", "absent")


def test_subtypes(hier):
    assert subtypes(hier, "A") == {"A", "B", "C", "D"}
    assert subtypes(hier, "B") == {"B", "D"}
    assert subtypes(hier, "C") == {"C"}


def test_fields_include_inherited(hier):
    assert hier.fields_of("D") == ["f", "g"]
    assert hier.fields_of("C") == ["f"]


def test_lookup_ignores_unrelated_classes(hier):
    extended = parse_program(HIERARCHY.replace(
        "method main()", "class Z {\n  method m() {\n    z1: r = this\n    z2: return r\n  }\n}\nmethod main()"))
    for cls in ("A", "B", "C", "D"):
        assert lookup_dispatch(extended, cls, "m") == lookup_dispatch(hier, cls, "m")


def test_rpo_mutrec_f(mutrec):
    # j1 is the jump joining n3 with n4
    assert reverse_postorder(mutrec.method("f")) == \
        ["entry", "n2", "n3", "j1", "c2", "n4", "n5", "exit"]


def test_rpo_linear_chain_is_textual():
    text = "method main() {\n" + "".join(f"  n{i}: x{i} = {i}\n" for i in range(5)) + "}\n"
    m = parse_program(text).method("main")
    assert reverse_postorder(m) == ["entry"] + [f"n{i}" for i in range(5)] + ["exit"]


def test_rpo_each_reachable_node_once(poly):
    for m in poly.all_methods():
        order = reverse_postorder(m)
        assert len(order) == len(set(order))
        assert order[0] == "entry" and order[-1] == "exit"


def test_backward_rpo_starts_at_exit(mutrec):
    order = reverse_postorder(mutrec.method("f"), backward=True)
    assert order[0] == "exit" and order[-1] == "entry"


def test_validate_mutrec_clean(mutrec):
    assert validate(mutrec) == []


def test_validate_unreachable_warning():
    p = parse_program("method main() {\n n1: goto n3\n n2: nop\n n3: nop\n}")
    diags = validate(p)
    assert [(d.severity, d.message, d.label) for d in diags] == [("warning", "unreachable node", "n2")]


def test_validate_vcall_on_unknown_local():
    p = parse_unchecked(HIERARCHY.replace("n1: x = new D", "n1: x = vcall y.m()"))
    errors = [d for d in validate(p) if d.severity == "error"]
    assert len(errors) == 1 and "'y'" in errors[0].message


def test_returns_route_to_single_exit(mutrec):
    f = mutrec.method("f")
    assert f.node("n5").successors == ["exit"]
    assert f.return_vars == ("c",)


def test_missing_method_lookup(mutrec):
    with pytest.raises(IRError):
        mutrec.method("nope")
