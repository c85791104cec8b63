#!/usr/bin/env python3
"""Recompute the Friedman and Nemenyi statistics from published average ranks.

Five models are compared: R2KM, RKM, RVFLwoDL, RVFL and one more baseline.
The classification ranks come from 38 datasets and the regression ranks
from 9.
"""

from r2km.stat_tests import friedman, nemenyi_cd, significant_pairs

MODELS = ("R2KM", "RKM", "RVFLwoDL", "RVFL", "baseline")
SETTINGS = {
    "classification": ((1.57, 3.80, 4.09, 2.96, 2.58), 38),
    "regression": ((1.44, 2.11, 4.44, 3.11, 3.89), 9),
}


def main():
    for name, (ranks, n) in SETTINGS.items():
        res = friedman(ranks, n)
        cd = nemenyi_cd(len(ranks), n)
        print(f"{name} (N={n})")
        print(f"  chi2_F = {res.chi2:.4f}  F_F = {res.f_stat:.4f}  df = {res.df_f}")
        print(f"  CD = {cd:.4f}")
        for a, b, gap in significant_pairs(ranks, cd, MODELS):
            print(f"  {a} vs {b}: rank gap {gap:.2f}")


if __name__ == "__main__":
    main()
