"""Axisymmetric Euler flow without swirl on the unit ball.

Modules
-------
specfun      the kernel function F(s) and its derivatives
greens       Green's function of the ball, velocity kernels and derivatives
grid         polar meridian grid and the nodal scalar field type
biot_savart  velocity, stream function and velocity gradient by quadrature
transport    semi-Lagrangian transport of w and particle trajectories
scenario     boundary-growth initial data and the sets near e1 = (1, 0)
diagnostics  gradient growth, Kato-shape, axis-rate and expansion checks
harness      configuration, run records, snapshot I/O and the CLI
"""

__version__ = "0.1.0"
