"""Grid-search the count scale of a sleep scorer on the synthetic night suite.

The scorers were fit on device counts whose units differ from ours, so the
scale that maps our counts onto theirs is chosen by CSS, then GST error.
"""
import argparse

from obeskit import suites
from obeskit.evaluation import TruthRecording, calibrate_count_scale
from obeskit.simulate import simulate
from obeskit.sleep import SleepSession


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scorer", choices=["cole", "sadeh"], default="sadeh")
    ap.add_argument("--nights", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    counts, truths = [], []
    for sc in suites.night_scenarios(seed=args.seed, n=args.nights):
        sim = simulate(sc)
        counts.append(suites.minute_counts(sim)[["minute_start", "counts"]])
        truths.append(TruthRecording(tuple(SleepSession(s["SS"], s["SE"]) for s in sim.truth["sleep"])))
    best, table = calibrate_count_scale(counts, truths, args.scorer)
    print(f"| scale | CSS | GST AE (min) |\n|---|---|---|")
    for scale, css, gst in table:
        print(f"| {scale:.3g} | {css:.2f} | {'n/a' if gst is None else f'{gst:.1f}'} |")
    print(f"\nbest {args.scorer} count scale: {best:.4g}")


if __name__ == "__main__":
    main()
