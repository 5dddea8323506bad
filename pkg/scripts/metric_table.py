"""Precision, recall and F1 for a list of (TP, FP, FN) rows.

    python3 scripts/metric_table.py 8,0,1 15,2,4 13,2,3 36,4,8
"""
import argparse

from obeskit.evaluation import prf


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("rows", nargs="+", help="TP,FP,FN")
    args = ap.parse_args()
    tot = [0, 0, 0]
    print("| TP | FP | FN | P | R | F1 |\n|---|---|---|---|---|---|")
    for row in args.rows:
        tp, fp, fn = (int(v) for v in row.split(","))
        tot = [tot[0] + tp, tot[1] + fp, tot[2] + fn]
        print("| {} | {} | {} | {} |".format(tp, fp, fn, " | ".join(_fmt(v) for v in prf(tp, fp, fn))))
    print("| **{}** | **{}** | **{}** | {} |".format(*tot, " | ".join(_fmt(v) for v in prf(*tot))))


def _fmt(v):
    return "n/a" if v is None else f"{v:.2f}"


if __name__ == "__main__":
    main()
