"""Differential runs on generated programs: inline oracle equivalence,
concrete soundness and worklist-order independence, with counts."""
import argparse
import random
import time
from collections import Counter

from valuectx.engine import do_analysis, do_analysis_backward, solution_dump
from valuectx.generate import GenConfig, pointer_program, scalar_program
from valuectx.oracle import check_abstraction, inline_oracle, run_concrete
from valuectx.parser import parse_program
from valuectx.pta import PointsToAnalysis
from valuectx.scalar_clients import LivenessAnalysis, SignAnalysis


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=500)
    ap.add_argument("--runs", type=int, default=10, help="concrete runs per program")
    ap.add_argument("--orders", type=int, default=5, help="random worklist orders per program")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--fuel", type=int, default=500)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    tally: Counter = Counter()
    t0 = time.perf_counter()
    for i in range(args.count):
        p = parse_program(scalar_program(rng))
        for client, solve in ((SignAnalysis, do_analysis), (LivenessAnalysis, do_analysis_backward)):
            same = solve(client(p), p).meet_over_valid_paths() == inline_oracle(p, client(p))
            tally[f"oracle/{client.__name__}/{'ok' if same else 'MISMATCH'}"] += 1

        for kind, client, text in (
                ("sign", SignAnalysis, scalar_program(rng, GenConfig(recursive=True))),
                ("pta", PointsToAnalysis, pointer_program(rng))):
            q = parse_program(text)
            result = do_analysis(client(q), q)
            sol = result.meet_over_valid_paths()
            for _ in range(args.runs):
                choices = [rng.random() < 0.5 for _ in range(rng.randint(0, 16))]
                trace = run_concrete(q, choices, fuel=args.fuel)
                tally[f"run/{kind}/{trace.status}"] += 1
                if check_abstraction(trace, sol, kind):
                    tally[f"sound/{kind}/VIOLATION"] += 1
            ref = solution_dump(result)
            for _ in range(args.orders):
                same = solution_dump(do_analysis(client(q), q, order_seed=rng.randrange(1 << 30))) == ref
                tally[f"order/{kind}/{'ok' if same else 'DIFF'}"] += 1
            tally[f"contexts/{kind}"] += len(result.reachable_contexts())
    for key in sorted(tally):
        print(f"{key:<34}{tally[key]:>8}")
    bad = sum(n for k, n in tally.items() if k.endswith(("MISMATCH", "VIOLATION", "DIFF")))
    print(f"failures {bad}  elapsed {time.perf_counter() - t0:.1f}s")
    raise SystemExit(1 if bad else 0)


if __name__ == "__main__":
    main()
