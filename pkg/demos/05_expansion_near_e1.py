"""The velocity near (1, 0) is governed by one integral.

Close to the point e1 = (1, 0), in sectors bounded away from the sphere
and from the plane, u^z is about -(4/pi) z Q(x) and u^r about
-(4/pi) (1 - r) Q(x), where Q(x) integrates w against a z / (a^2 + z^2)^2
(a = 1 - r) over the rectangle between x and the fixed scale N.  For
w = 1, Q grows like log(1/|x - e1|); the script shows that growth and the
size of the remainder for the scenario field.

Run:  python demos/05_expansion_near_e1.py
"""

import math

import numpy as np

from axieuler.diagnostics import key_integral_q, lemma41_residual, linear_fit
from axieuler.scenario import ScenarioParams, ks_initial_data, sample_sector, scenario_grid

print("distance     Q(x) with w = 1")
logs, vals = [], []
for d in (1e-2, 1e-3, 1e-4, 1e-5):
    p = ScenarioParams(eps=d / 2, delta=d, bigN=0.1)
    q = key_integral_q((1 - d * math.sin(0.3), d * math.cos(0.3)), 1.0, p)
    logs.append(math.log(1 / d))
    vals.append(q)
    print(f"{d:8.0e}     {q:.6f}")
slope, icpt, r2 = linear_fit(logs, vals)
print(f"Q = {slope:.4f} log(1/d) {icpt:+.4f}   (R^2 = {r2:.8f})")

sp = ScenarioParams(eps=0.05, delta=0.2, bigN=0.1, inner_exponent=2)
w = ks_initial_data(sp, scenario_grid(64, 64))
print("\nscenario field, |x - e1| < 0.2, remainder divided by z (u^z) or 1 - r (u^r):")
for comp, tag in (("uz", "D1"), ("ur", "D2")):
    res = [lemma41_residual(x, w, sp, comp) for x in sample_sector(sp, 20, tag, seed=1)]
    scaled = np.array([r.residual_scaled for r in res])
    main = np.array([r.main_term / (r.x.z if comp == "uz" else 1 - r.x.r) for r in res])
    print(f"  {comp}: |main term| up to {np.abs(main).max():.3f}, "
          f"|remainder| up to {np.abs(scaled).max():.3f}")
