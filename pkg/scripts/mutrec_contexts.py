"""Reproduce the mutual-recursion sign example: value contexts, the
transition diagram, and the merged values at the non-distributive node."""
import argparse

from valuectx.cli import context_table
from valuectx.engine import do_analysis, transitions_dot
from valuectx.fixtures import load_fixture
from valuectx.scalar_clients import SignAnalysis, format_env


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dot", action="store_true", help="also print the transition diagram")
    args = ap.parse_args()

    p = load_fixture("mutrec")
    result = do_analysis(SignAnalysis(p), p)
    print(context_table(result), end="")
    print()
    for s, label, ref, t in result.canonical_transitions():
        print(f"X{s} --{label}--> X{t}  ({ref})")
    merged = result.meet_over_valid_paths()
    print()
    print("merged at f:n3  in =", format_env(merged.value_before("f", "n3")),
          " out =", format_env(merged.value_after("f", "n3")))
    print(f"steps: {result.steps}")
    if args.dot:
        print()
        print(transitions_dot(result), end="")


if __name__ == "__main__":
    main()
