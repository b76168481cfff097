"""Regenerate the data behind every figure into one directory.

    python3 scripts/reproduce_figures.py --out figures/ [--only fig2d fig7]

The optimizer sweep (fig4) dominates the runtime; ``--fig4-seeds`` trades
statistics for speed.
"""

import argparse
import time
from pathlib import Path

from pulseorigin.cli import (FIGURES, reproduce_fig2d, reproduce_fig4, reproduce_fig5,
                             reproduce_fig7)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="figures")
    ap.add_argument("--only", nargs="+", choices=FIGURES, default=list(FIGURES))
    ap.add_argument("--fig4-durations", type=float, nargs="+",
                    default=[0.5, 1.0, 1.5, 2.0, 2.5, 3.0])
    ap.add_argument("--fig4-seeds", type=int, default=3)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for fig in args.only:
        t0 = time.time()
        if fig == "fig2d":
            paths = [reproduce_fig2d(out)]
        elif fig == "fig4":
            paths = [reproduce_fig4(out, args.fig4_durations, args.fig4_seeds, args.threads)]
        elif fig == "fig5":
            paths = reproduce_fig5(out)
        else:
            paths = [reproduce_fig7(out)]
        print(f"{fig}: {', '.join(str(p) for p in paths)} ({time.time() - t0:.1f} s)")


if __name__ == "__main__":
    main()
