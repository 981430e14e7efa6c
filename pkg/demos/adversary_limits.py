"""Where the adversary-utility and with-replacement inequalities are tight or fail.

Prints the exact instances behind the failing acceptance checks: the
strict utility bound meeting equality, a three-type database on which
the full-prior adversary beats d + d, and the single-record witness of
the with-replacement counter falling below T/(n+1) once T >= 3.

    python demos/adversary_limits.py
"""

from smoothdp import Epsilon, MechanismDescriptor
from smoothdp.adversary import utility_bound_details
from smoothdp.bounds import with_replacement_eps
from smoothdp.pointwise import counting_delta


def utility_case(x, xp, T, eps):
    shm = MechanismDescriptor.shm(T)
    for pair in (False, True):
        r = utility_bound_details(shm, x, xp, eps, "rational", pair_prior=pair)
        prior = "differing pair" if pair else "all types"
        print(f"  x={x} x'={xp} T={T} eps={eps}: prior over {prior}: u = {r.utility} "
              f"({float(r.utility):.4f}), d + d = {r.d_sum} ({float(r.d_sum):.4f})")


def main():
    print("utility bound, equality case (strict < fails):")
    utility_case((2, 2), (1, 3), 2, 3.0)
    print("utility bound, third type (u > d + d under the full prior):")
    utility_case((0, 1, 2), (0, 2, 1), 1, 0.5)
    print("with-replacement single-record witness, delta_1 vs T/(n+1) and T/(n+T-1):")
    for n in (3, 5, 10):
        for T in (1, 2, 3, 4):
            d1 = counting_delta(n, T, 1, Epsilon.of(with_replacement_eps(n, T)), "rational")
            print(f"  n={n:>2} T={T}: delta_1 = {float(d1):.4f}, T/(n+1) = {T / (n + 1):.4f}, "
                  f"T/(n+T-1) = {T / (n + T - 1):.4f}")


if __name__ == "__main__":
    main()
