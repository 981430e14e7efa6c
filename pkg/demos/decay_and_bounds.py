"""Exact smoothed delta of the sampling histogram next to its closed-form bounds.

Sweeps n for Pi = {B(0.3), B(0.7)}, T = n/2, eps = ln 4 and prints the
witness floor, the exact value, the upper bound (all as natural logs) and
the worst-case DP delta, then fits ln delta against n.

    python demos/decay_and_bounds.py
"""

import math
from fractions import Fraction

import numpy as np
from scipy import stats

from smoothdp import DistributionSet, Epsilon, MechanismDescriptor, PrivacyQuery, bernoulli_pmf, smoothed_delta_exact
from smoothdp.bounds import bound_params_for, shm_tightness_floor_log, shm_upper_bound_log
from smoothdp.pointwise import worst_case_dp_delta


def main():
    pi = DistributionSet([bernoulli_pmf(Fraction(3, 10), mode="rational"),
                          bernoulli_pmf(Fraction(7, 10), mode="rational")])
    eps = Epsilon.log_of(4)
    ns, logs = [], []
    print(f"{'n':>5} {'log floor':>10} {'log delta':>10} {'log bound':>10} {'worst case':>10}")
    for n in range(20, 201, 20):
        T = n // 2
        rep = smoothed_delta_exact(PrivacyQuery(MechanismDescriptor.shm(T), eps, n, pi, numeric="rational"))
        log_delta = math.log(Fraction(rep.exact_value))
        wc = worst_case_dp_delta(MechanismDescriptor.shm(T), n, 2, eps, "float")
        lo = shm_tightness_floor_log(n, T, pi)
        hi = shm_upper_bound_log(bound_params_for(n, T, eps, pi))
        print(f"{n:>5} {lo:>10.2f} {log_delta:>10.3f} {hi:>10.3f} {wc:>10.3f}")
        ns.append(n)
        logs.append(log_delta)
    fit = stats.linregress(np.array(ns, float), np.array(logs))
    print(f"ln delta ~ {fit.intercept:.3f} + {fit.slope:.5f} n   (R^2 = {fit.rvalue ** 2:.4f})")


if __name__ == "__main__":
    main()
