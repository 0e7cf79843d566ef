"""Velocity from vorticity: the Biot-Savart quadrature against an exact flow.

For w = omega^theta / r identically 1 in the unit ball, the flow is the
classical spherical vortex with stream function r^2 (1 - r^2 - z^2) / 10.
The script recovers it from the grid quadrature, then shows the
properties any output of the solver has: no flow through the sphere, no
radial velocity on the axis, and the odd/even parities when w is odd in z.

Run:  python demos/02_spherical_vortex.py
"""

import numpy as np

from axieuler.biot_savart import hill_velocity, stream_function_at, velocity_field
from axieuler.grid import PolarGrid, ScalarFieldRZ, Symmetry

grid = PolarGrid(32, 64, Symmetry.NONE)
w = ScalarFieldRZ.from_function(grid, lambda r, z: np.ones_like(r))

pts = (np.array([0.2, 0.5, 0.8, 0.5, 0.95]), np.array([0.1, -0.3, 0.2, 0.6, 0.0]))
ur, uz = velocity_field(pts, w)
hr, hz = hill_velocity(*pts)
print("   r      z      u^r quadrature   u^r exact        u^z quadrature   u^z exact")
for k in range(len(pts[0])):
    print(f"{pts[0][k]:5.2f}  {pts[1][k]:5.2f}   {ur[k]: .10f}  {hr[k]: .10f}   "
          f"{uz[k]: .10f}  {hz[k]: .10f}")

x = (0.5, 0.3)
psi_exact = x[0] ** 2 * (1 - x[0] ** 2 - x[1] ** 2) / 10
print(f"\nstream function at {x}: {stream_function_at(x, w):.10f} (exact {psi_exact:.10f})")

th = np.linspace(-np.pi / 2, np.pi / 2, 41)
ur, uz = velocity_field((np.cos(th), np.sin(th)), w)
print(f"max |u . n| on the sphere: {np.max(np.abs(ur * np.cos(th) + uz * np.sin(th))):.1e}")

zs = np.linspace(-0.9, 0.9, 7)
print(f"u^r on the axis: {np.asarray(velocity_field((0 * zs, zs), w)[0])}")

# an odd field on the half grid: u^r even, u^z odd in z
odd = PolarGrid(24, 24, Symmetry.ODD)
wo = ScalarFieldRZ.from_function(odd, lambda r, z: z * np.exp(-4 * ((r - 0.5) ** 2 + z * z)))
up = velocity_field((np.array([0.4]), np.array([0.25])), wo)
dn = velocity_field((np.array([0.4]), np.array([-0.25])), wo)
print(f"odd w at z = +-0.25: u^r {up[0][0]:.6e} / {dn[0][0]:.6e}, "
      f"u^z {up[1][0]:.6e} / {dn[1][0]:.6e}")
