#!/usr/bin/env python3
"""Sweep the empirical approximable fraction across Q_max.

Contrasts a divergent approximating function (q^-1/2, fraction should climb
toward 1) with the convergent safety function phi (fraction stays below its
union bound) on the fiber {sqrt(2)-1} x [0,1].

Usage: run_measure_sweep.py [n_points]
"""

import sys

from diophlab.certified import parse_vector
from diophlab.measure_lab import MeasureExperiment, fraction_profile, phi_contrast
from diophlab.psi import parse_psi

N_POINTS = int(sys.argv[1]) if len(sys.argv) > 1 else 10_000
CHECKPOINTS = [10 ** 3, 10 ** 4, 10 ** 5, 10 ** 6]


def run() -> None:
    x = parse_vector("sqrt2m1")

    exp = MeasureExperiment(
        x=x, psi=parse_psi("q^-0.5"), d=2, k=1, Q_max=CHECKPOINTS[-1],
        sampling="grid", n_points=N_POINTS,
    )
    print("divergent probe psi(q) = q^-1/2:")
    for q_max, frac in fraction_profile(exp, CHECKPOINTS):
        print(f"  Q_max = {q_max:>9,}  fraction = {frac:.4f}")

    print("convergent contrast phi(q) = (q log^2 q)^-1/2, Q0 = 1000:")
    rep = phi_contrast(x, 2, 10 ** 3, CHECKPOINTS[-1], "grid", N_POINTS)
    print(f"  empirical fraction = {rep.empirical_fraction:.4f}")
    print(f"  union bound        = {rep.union_bound:.4f} (+/- 3*{rep.sigma:.4f})")
    within = rep.empirical_fraction <= rep.union_bound + 3 * rep.sigma
    print(f"  within bound: {within}")


if __name__ == "__main__":
    run()
