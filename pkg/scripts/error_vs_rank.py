#!/usr/bin/env python3
"""Surrogate prediction error versus reduced-basis rank.

Loads a campaign directory, splits it into train/test, trains one model at
the largest rank, and evaluates the nested truncations on the held-out
successes — separating the order-reduction error (projection only) from the
full prediction error (projection + regression):

    python scripts/error_vs_rank.py path/to/campaign --n-train 45
"""

import argparse
from pathlib import Path

import numpy as np

from stentrom.dataset import assemble_snapshots, load_dataset, make_split
from stentrom.rom import ReducedBasis, ReducedModel, train_reduced_model


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("dataset", type=Path)
    ap.add_argument("--n-train", type=int, default=45)
    ap.add_argument("--n-cl", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--ranks", type=int, nargs="+", default=None)
    args = ap.parse_args()

    ds = load_dataset(args.dataset)
    make_split(ds, args.n_train, seed=args.seed)
    test_set = set(ds.test_idx.tolist())
    test = [s for s in ds.successes if s.index in test_set]
    S, _, MU_CL = assemble_snapshots(ds, indices=ds.train_idx)
    L_max = S.shape[1] - 1
    ranks = args.ranks or sorted({1, 2, 3, 5, 8, 12, L_max} & set(range(1, L_max + 1)))

    model = train_reduced_model(S, MU_CL, 1e-6, "mu_cl", n_cl=args.n_cl, L_override=L_max, seed=args.seed)
    print(f"{len(ds.train_idx)} train / {len(test)} test successes, L_max={L_max}")
    print(f"{'L':>4}  {'AE_rb [mm]':>11}  {'AE_p [mm]':>11}")
    for L in ranks:
        basis = ReducedBasis(V=model.basis.V[:, :L], singular_values=model.basis.singular_values, L=L, eps_pod=0.0)
        sub = ReducedModel(basis=basis, regressors=model.regressors[:L], predictor_kind="mu_cl", n_cl=args.n_cl)
        e_rb, e_p = [], []
        for s in test:
            proj = basis.reconstruct(basis.project(s.u_h))
            pred = sub.predict(s.mu_cl)["u_p"]
            e_rb.append(np.linalg.norm((proj - s.u_h).reshape(-1, 3), axis=1).mean())
            e_p.append(np.linalg.norm((pred - s.u_h).reshape(-1, 3), axis=1).mean())
        print(f"{L:>4}  {np.mean(e_rb):>11.5f}  {np.mean(e_p):>11.5f}")


if __name__ == "__main__":
    main()
