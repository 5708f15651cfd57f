"""k-length call path counts, context-sensitive vs class hierarchy, for
the bundled fixtures and a batch of generated pointer programs."""
import argparse
import random

from valuectx.callgraph import build_cha, build_context_callgraph, count_k_paths, delta_percent
from valuectx.engine import do_analysis
from valuectx.fixtures import load_fixture
from valuectx.generate import pointer_program
from valuectx.parser import parse_program
from valuectx.pta import PointsToAnalysis


def rows(name, p, k_max):
    cg = build_context_callgraph(do_analysis(PointsToAnalysis(p), p))
    cha = build_cha(p)
    for k in range(1, k_max + 1):
        a, b = count_k_paths(cg, k), count_k_paths(cha, k)
        yield name, k, a, b, delta_percent(a, b)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k", type=int, default=10)
    ap.add_argument("--generated", type=int, default=5, help="number of generated programs")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    programs = [(n, load_fixture(n)) for n in ("twoclass", "poly", "default_site", "mutrec")]
    rng = random.Random(args.seed)
    programs += [(f"gen{i}", parse_program(pointer_program(rng))) for i in range(args.generated)]
    print(f"{'program':<14}{'k':>3}{'fcpa':>14}{'cha':>14}{'delta%':>9}")
    for name, p in programs:
        for row in rows(name, p, args.k):
            print(f"{row[0]:<14}{row[1]:>3}{row[2]:>14}{row[3]:>14}{row[4]:>9}")


if __name__ == "__main__":
    main()
