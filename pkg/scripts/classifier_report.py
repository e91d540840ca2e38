#!/usr/bin/env python3
"""Train the classifier bank on a campaign and print the evaluation table.

Accuracy, sensitivity, specificity, precision, F1, and AUC for each of the
six classifier families, on a held-out split of the campaign outcomes:

    python scripts/classifier_report.py path/to/campaign --n-train 45
"""

import argparse
from pathlib import Path

import numpy as np

from stentrom.classify import evaluation_report, report_table, train_bank
from stentrom.dataset import load_dataset, make_split


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("dataset", type=Path)
    ap.add_argument("--n-train", type=int, default=45)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    ds = load_dataset(args.dataset)
    make_split(ds, args.n_train, seed=args.seed)
    train_set, test_set = set(ds.train_idx.tolist()), set(ds.test_idx.tolist())
    conv = ds.converged_samples
    X_tr = np.stack([s.mu_B for s in conv if s.index in train_set])
    y_tr = np.array([s.label for s in conv if s.index in train_set])
    X_te = np.stack([s.mu_B for s in conv if s.index in test_set])
    y_te = np.array([s.label for s in conv if s.index in test_set])

    bank = train_bank(X_tr, y_tr, seed=args.seed)
    majority = max(float(np.mean(y_te == 1)), float(np.mean(y_te == 0)))
    print(f"{len(y_tr)} train / {len(y_te)} test, majority baseline {majority:.2%}")
    print(report_table(evaluation_report(bank, X_te, y_te)))


if __name__ == "__main__":
    main()
