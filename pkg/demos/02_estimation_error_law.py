#!/usr/bin/env python3
"""The estimation error of a coefficient is Rayleigh-distributed.

Averaging M unit-modulus phasors leaves a complex error around the true
coefficient whose modulus follows a Rayleigh law with scale ~ 1/sqrt(2M):
mean 0.5*sqrt(pi/M), variance (4-pi)/(4M). This demo reruns that audit for
a few configurations and shows the 1/sqrt(M) shrinkage plus the vanishing
pseudo-variance that certifies circular symmetry of the error cloud.
"""

import math

from mbfdetect import verify_rayleigh

print(f"{'c':>4} {'n':>3} {'M':>6} | {'mean |err|':>10} {'predicted':>10} "
      f"| {'var |err|':>10} {'predicted':>10} | {'KS p':>6} {'|pseudo|':>9}")
for c in (1.0, 2.0):
    for m in (1000, 10000):
        r = verify_rayleigh(c=c, n=1, m=m, trials=600, seed=2024)
        print(f"{c:>4} {1:>3} {m:>6} | {r.empirical_mean_abs_error:>10.5f} "
              f"{r.predicted_mean:>10.5f} | {r.empirical_var_abs_error:>10.3e} "
              f"{r.predicted_var:>10.3e} | {r.rayleigh_ks_p:>6.3f} "
              f"{r.pseudo_variance_magnitude:>9.6f}")

print("\nWhere the approximation thins out: at c=4, n=1 the coefficient itself")
print("is large (|a_1| = 0.266), so the exact error scale carries a visible")
print("(1 - |a_1|^2) correction; the report exposes both reference tests.")
r = verify_rayleigh(c=4.0, n=1, m=1000, trials=600, seed=2024)
print(f"  approximate-scale KS p = {r.rayleigh_ks_p:.4f}")
print(f"  exact-scale KS p       = {r.rayleigh_ks_p_exact:.4f}")
print(f"  |a_1| = {r.coefficient_magnitude:.4f}, "
      f"bias factor sqrt(1-|a_1|^2) = {math.sqrt(1 - r.coefficient_magnitude ** 2):.4f}")
