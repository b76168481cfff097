"""Search optimizer settings for the reference beamsplitters.

For every (origin fraction, duration, origin weight, start scale, seed) candidate the pulse
is optimized and scored; results are written as CSV and the candidate with the
smallest origin spread per family is printed.

    python3 scripts/search_reference_pulses.py --out search.csv
"""

import argparse
import csv
import itertools
import time
from dataclasses import replace

from pulseorigin.optimize import OptimizationConfig, optimize_beamsplitter
from pulseorigin.references import evaluate_family


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--fractions", type=float, nargs="+", default=[1.0, 0.4])
    ap.add_argument("--durations", type=float, nargs="+", default=[2.0, 3.0, 4.0])
    ap.add_argument("--weights", type=float, nargs="+", default=[1e3, 1e4, 1e5])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--iterations", type=int, default=400)
    ap.add_argument("--init-scale", type=float, nargs="+", default=[0.5])
    ap.add_argument("--out", default="reference_search.csv")
    args = ap.parse_args(argv)

    rows = []
    for frac, dur, wo, init, seed in itertools.product(args.fractions, args.durations,
                                                       args.weights, args.init_scale, args.seeds):
        cfg = OptimizationConfig(duration_tpi=dur, origin_fraction=frac, origin_weight=wo,
                                 max_iterations=args.iterations, rng_seed=seed,
                                 init_scale=init)
        t0 = time.perf_counter()
        res = optimize_beamsplitter(cfg)
        name = "point-to-point" if frac == 1.0 else "optimized-origin"
        try:
            m = evaluate_family(name, res.waveform).to_dict()
        except (ArithmeticError, ValueError) as exc:
            print(f"skipped {cfg}: {exc}", flush=True)
            continue
        m.update(origin_fraction=frac, duration_tpi=dur, origin_weight=wo, seed=seed,
                 init_scale=init,
                 design_infidelity=res.terminal_infidelity,
                 seconds=time.perf_counter() - t0)
        rows.append(m)
        print(", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}"
                        for k, v in m.items()), flush=True)
        with open(args.out, "w", newline="") as fh:  # rewritten after every candidate
            wr = csv.DictWriter(fh, fieldnames=list(rows[0]))
            wr.writeheader()
            wr.writerows(rows)
    for frac in args.fractions:
        cand = [r for r in rows if r["origin_fraction"] == frac]
        best = min(cand, key=lambda r: r["origin_spread_ns"])
        print("best", frac, best)


if __name__ == "__main__":
    main()
