"""Time the hot paths with and without numba.

Each backend runs in a fresh interpreter because the choice is fixed at
import time by SHAREDSTEER_DISABLE_NUMBA.

    python benchmarks/bench_numba.py [--t-end 100] [--repeat 2]
"""

import argparse
import json
import os
import subprocess
import sys
import time
from dataclasses import replace


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def child(t_end, repeat):
    from sharedsteer._jit import backend
    from sharedsteer.ident import IdentProblem, pem_fit
    from sharedsteer.metrics import LaneGeometry, tlc_series
    from sharedsteer.simloop import Pulse, Scenario, condition_scenario, simulate

    sc = condition_scenario(Scenario(pulse=Pulse(), t_end=t_end), "normal", "normal")
    t0 = time.perf_counter()
    log = simulate(sc)  # first call includes compilation
    first = time.perf_counter() - t0
    prob = IdentProblem.from_log(log, output="phi_target")
    prob.n_starts = 1
    geom = LaneGeometry()
    out = {
        "backend": backend(),
        "first_simulate": first,
        "simulate": _best(lambda: simulate(sc), repeat),
        "tlc_series": _best(lambda: tlc_series(log, geom), repeat),
        "pem_fit": _best(lambda: pem_fit(prob), repeat),
    }
    print(json.dumps(out))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--t-end", type=float, default=100.0, help="simulated seconds per run (the curve starts near 60 s)")
    ap.add_argument("--repeat", type=int, default=2)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args(argv)
    if args.child:
        child(args.t_end, args.repeat)
        return 0

    rows = []
    for disable in ("0", "1"):
        env = dict(os.environ, SHAREDSTEER_DISABLE_NUMBA=disable)
        cmd = [sys.executable, __file__, "--child", "--t-end", str(args.t_end), "--repeat", str(args.repeat)]
        res = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
        rows.append(json.loads(res.stdout.strip().splitlines()[-1]))

    keys = ["first_simulate", "simulate", "tlc_series", "pem_fit"]
    print(f"{'task':<16}" + "".join(f"{r['backend']:>12}" for r in rows) + f"{'speedup':>10}")
    for k in keys:
        a, b = rows[0][k], rows[1][k]
        print(f"{k:<16}{a:>11.3f}s{b:>11.3f}s{b / a:>9.1f}x")
    print(f"(simulated {args.t_end:g} s at 1/1200 s step; best of {args.repeat})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
