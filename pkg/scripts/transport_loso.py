"""Leave-one-subject-out confusion matrix for the transport mode classifier.

Each synthetic "subject" holds its own draws of the mode generators. With a
single draw per subject a held-out walker whose cadence falls outside the
training draws is easily mistaken for a bus, so use a few.
"""
import argparse

import numpy as np

from obeskit.evaluation import confusion
from obeskit.simulate import transport_training_set
from obeskit.transport import leave_one_subject_out, merge_modes


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--subjects", type=int, default=4)
    ap.add_argument("--seconds", type=int, default=30, help="seconds per draw")
    ap.add_argument("--draws", type=int, default=4, help="draws per mode and subject")
    args = ap.parse_args()

    X, y, subj = [], [], []
    for s in range(args.subjects):
        Xs, ys = transport_training_set(seed=100 + s, seconds=args.seconds, reps=args.draws)
        X.append(Xs)
        y += ys
        subj += [f"s{s}"] * len(ys)
    truth, pred = leave_one_subject_out(np.vstack(X), y, subj)
    labels = sorted(set(merge_modes(y)), key=merge_modes(y).index)
    cm = confusion(truth, pred, labels)
    pct = cm.normalized()
    print("| truth \\ pred | " + " | ".join(labels) + " |")
    print("|---" * (len(labels) + 1) + "|")
    for lab, row in zip(labels, pct):
        print(f"| {lab} | " + " | ".join(f"{v:.1f}" for v in row) + " |")
    print(f"\naccuracy {np.trace(cm.counts) / cm.total:.3f} over {cm.total} one-second frames")


if __name__ == "__main__":
    main()
