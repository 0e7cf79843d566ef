"""The special function F behind the axisymmetric Green's function.

F(s) has a logarithmic singularity at s = 0 and decays like s^(-3/2).
The package evaluates it two ways: an adaptive-quadrature oracle and a
fast piecewise evaluator (small-s fit, Chebyshev panels, far series).
This script prints both, the limits they approach, and the speed gap.

Run:  python demos/01_special_function.py
"""

import math
import time

import numpy as np

from axieuler.specfun import LOG8_MINUS_2, asymptotic_table, f_all, f_oracle

s = np.logspace(-8, 8, 9)
fast, d1, d2 = f_all(s)
ora = f_oracle(s)

print("s          F fast                 F oracle               |diff|")
for si, a, b in zip(s, fast, ora):
    print(f"{si:8.0e}   {a:.16e}  {b:.16e}  {abs(a - b):.1e}")

# near zero F + log(s)/2 settles on log 8 - 2
print(f"\nF(s) + log(s)/2 at s = 1e-8: {fast[0] + 0.5 * math.log(1e-8):.12f}"
      f"   (log 8 - 2 = {LOG8_MINUS_2:.12f})")

print("\nleading coefficients recovered at s = 1e-8 and 1e8:")
for name, row in asymptotic_table().items():
    print(f"  {name:22s} measured {row['measured']: .10f}  expected {row['expected']: .10f}")

grid = np.logspace(-8, 8, 20000)
t0 = time.perf_counter()
f_all(grid)
t_fast = time.perf_counter() - t0
t0 = time.perf_counter()
f_oracle(grid[::100])
t_ora = (time.perf_counter() - t0) * 100
print(f"\n20000 evaluations: fast {1e3 * t_fast:.1f} ms, oracle about {t_ora:.1f} s")
