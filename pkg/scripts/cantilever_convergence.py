#!/usr/bin/env python3
"""Mesh-refinement study of the corotational beam bench.

Compares the relaxed tip deflection of a clamped wire under a transverse
tip load against the Euler-Bernoulli reference PL^3 / (3EI) for a range of
element counts. Run:

    python scripts/cantilever_convergence.py --length 10 --load 1e-4
"""

import argparse

import numpy as np

from stentrom.solver import beam_bench_cantilever


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--length", type=float, default=10.0, help="wire length [mm]")
    ap.add_argument("--radius", type=float, default=0.05, help="wire radius [mm]")
    ap.add_argument("--modulus", type=float, default=225.0, help="Young's modulus [GPa]")
    ap.add_argument("--load", type=float, default=1e-4, help="tip load [N]")
    ap.add_argument("--elements", type=int, nargs="+", default=[2, 4, 8, 16, 32])
    args = ap.parse_args()

    I = np.pi * args.radius**4 / 4.0
    ref = args.load * args.length**3 / (3.0 * args.modulus * 1e3 * I)
    print(f"Euler-Bernoulli reference deflection: {ref:.6f} mm")
    print(f"{'elements':>9}  {'tip [mm]':>12}  {'rel err':>9}")
    for n in args.elements:
        tip = beam_bench_cantilever(args.length, args.radius, args.modulus, args.load, n_elements=n)
        print(f"{n:>9}  {tip:>12.6f}  {abs(tip - ref) / ref:>9.2%}")


if __name__ == "__main__":
    main()
