"""The meridian kernel function F and its first two derivatives.

    F(s) = int_0^pi cos(t) / sqrt(2 (1 - cos t) + s) dt,      s > 0.

F is log-singular at s = 0 and decays like s^(-3/2) at infinity.  Two
evaluation routes are provided:

* an adaptive-quadrature oracle (slow, tolerance-controlled), and
* a fast piecewise evaluator: a fitted log-polynomial near 0, piecewise
  Chebyshev interpolation in log s in the middle and a convergent inverse
  power series at infinity.

The fast evaluator is also exposed as numba scalar kernels (`f01`, `f012`)
for use inside the Biot-Savart loops.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numba
import numpy as np
import scipy.integrate
import scipy.special

__all__ = [
    "FRegimeKind",
    "FRegime",
    "QuadratureSpec",
    "SpecfunDomainError",
    "OracleConvergenceError",
    "f_oracle",
    "f_prime_oracle",
    "f_second_oracle",
    "f_cosine_reference",
    "f_fast",
    "f_prime",
    "f_second",
    "f_all",
    "verify_f_bounds",
    "asymptotic_table",
    "build_table",
    "LOG8_MINUS_2",
    "EXPANSION_RADIUS",
]

LOG8_MINUS_2 = math.log(8.0) - 2.0

# For 0 < s <= EXPANSION_RADIUS the logarithmic expansion
#   F(s) = -log(s)/2 + log 8 - 2 + R(s),  |R(s)| <= s (1 + |log s|) / 2,
# holds (the measured constant is below 0.3).
EXPANSION_RADIUS = 1.0

# Coverage of the shipped table.  FRegime switch points must lie inside.
TABLE_LO = 1e-4
TABLE_HI = 1e4
NEAR_ZERO_FIT_MAX = 2e-3
FAR_SERIES_MIN = 40.0
N_FAR_TERMS = 16

_TABLE_FILE = "ftable.npz"


class SpecfunDomainError(ValueError):
    """Raised for arguments outside s > 0."""


class OracleConvergenceError(RuntimeError):
    """Raised when the quadrature oracle cannot meet its tolerance."""


class FRegimeKind(enum.Enum):
    NearZero = "NearZero"
    Mid = "Mid"
    NearInfinity = "NearInfinity"


@dataclass(frozen=True)
class FRegime:
    """Switch points of the fast evaluator.

    ``s < switch_lo`` uses the fitted small-s expansion, ``s > switch_hi``
    the inverse power series and everything in between the tabulated
    interpolant.
    """

    switch_lo: float = 1e-3
    switch_hi: float = 1e3

    def __post_init__(self):
        if not (self.switch_lo > 0 and self.switch_hi > 0):
            raise ValueError("switch points must be positive")
        if not self.switch_lo < self.switch_hi:
            raise ValueError("switch_lo must be smaller than switch_hi")
        if not TABLE_LO <= self.switch_lo <= NEAR_ZERO_FIT_MAX:
            raise ValueError(
                f"switch_lo must lie in [{TABLE_LO}, {NEAR_ZERO_FIT_MAX}]")
        if not FAR_SERIES_MIN <= self.switch_hi <= TABLE_HI:
            raise ValueError(
                f"switch_hi must lie in [{FAR_SERIES_MIN}, {TABLE_HI}]")

    def kind(self, s: float) -> FRegimeKind:
        if s < self.switch_lo:
            return FRegimeKind.NearZero
        if s > self.switch_hi:
            return FRegimeKind.NearInfinity
        return FRegimeKind.Mid


DEFAULT_REGIME = FRegime()


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances for adaptive quadrature.

    The oracle accepts a value when the estimated error is below
    ``max(abs_tol, rel_tol * |value|)``.
    """

    abs_tol: float = 1e-300
    rel_tol: float = 1e-13
    max_refinements: int = 400

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be strictly positive")
        if int(self.max_refinements) < 1:
            raise ValueError("max_refinements must be a positive integer")


DEFAULT_ORACLE_SPEC = QuadratureSpec()


def _check_positive(s):
    s = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(s)) or np.any(s <= 0):
        raise SpecfunDomainError("F is defined for finite s > 0 only")
    return s


# ---------------------------------------------------------------------------
# Oracle
# ---------------------------------------------------------------------------

# Integrating the defining integral by parts gives the cancellation-free form
#   F(s) = int_0^pi sin^2 t / (2(1 - cos t) + s)^(3/2) dt,
# and with t = 2 phi, sigma^2 = s/4,
#   F^(k)(s) = c_k int_0^(pi/2) sin^2 phi cos^2 phi / (sin^2 phi + sigma^2)^(3/2+k) dphi.
_ORACLE_COEF = (1.0, -3.0 / 8.0, 15.0 / 64.0)


def _quad(func, a, b, spec: QuadratureSpec, what: str, s: float):
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.integrate.IntegrationWarning)
        try:
            val, err = scipy.integrate.quad(
                func, a, b, epsabs=spec.abs_tol, epsrel=spec.rel_tol,
                limit=int(spec.max_refinements))
        except scipy.integrate.IntegrationWarning as exc:
            raise OracleConvergenceError(
                f"{what}: quadrature did not converge at s={s:g}: {exc}") from None
    if not np.isfinite(val) or err > max(spec.abs_tol, spec.rel_tol * abs(val)):
        raise OracleConvergenceError(
            f"{what}: error estimate {err:.3g} above tolerance at s={s:g}")
    return val


def _oracle_scalar(s: float, order: int, spec: QuadratureSpec) -> float:
    sig = 0.5 * math.sqrt(s)
    p = 1.5 + order
    # phi = sig*sinh(t) resolves the width-sigma peak at phi = 0.
    tmax = math.asinh(0.5 * math.pi / sig)

    def integrand(t):
        phi = sig * math.sinh(t)
        sn = math.sin(phi)
        cs = math.cos(phi)
        return sn * sn * cs * cs / (sn * sn + sig * sig) ** p * sig * math.cosh(t)

    val = _quad(integrand, 0.0, tmax, spec, f"F^({order})", s)
    return _ORACLE_COEF[order] * val


def _oracle(s, order, spec):
    s = _check_positive(s)
    flat = np.array([_oracle_scalar(float(v), order, spec) for v in s.ravel()])
    out = flat.reshape(s.shape)
    return float(out) if out.ndim == 0 else out


def f_oracle(s, spec: QuadratureSpec = DEFAULT_ORACLE_SPEC):
    """F(s) by adaptive quadrature.

    Parameters
    ----------
    s : float or array_like
        Positive arguments.
    spec : QuadratureSpec
        Tolerances; an unconverged integral raises instead of returning.

    Returns
    -------
    float or ndarray

    Raises
    ------
    SpecfunDomainError
        If any ``s <= 0``.
    OracleConvergenceError
        If the tolerance cannot be met within ``spec.max_refinements``
        subdivisions.
    """
    return _oracle(s, 0, spec)


def f_prime_oracle(s, spec: QuadratureSpec = DEFAULT_ORACLE_SPEC):
    """F'(s) by adaptive quadrature (see `f_oracle`)."""
    return _oracle(s, 1, spec)


def f_second_oracle(s, spec: QuadratureSpec = DEFAULT_ORACLE_SPEC):
    """F''(s) by adaptive quadrature (see `f_oracle`)."""
    return _oracle(s, 2, spec)


def f_cosine_reference(s: float, order: int = 0,
                       spec: QuadratureSpec = QuadratureSpec(rel_tol=1e-11)) -> float:
    """Quadrature of the un-integrated cosine form, for cross-checks.

    Evaluates ``c * int_0^(pi/2) (1 - 2 sin^2 phi) / (sin^2 phi + sigma^2)^p``
    with ``p = 1/2, 3/2, 5/2`` for orders 0, 1, 2.  The integrand changes
    sign, so this route loses relative accuracy for large ``s``; it is only
    meant for moderate arguments.
    """
    s = float(_check_positive(s))
    sig = 0.5 * math.sqrt(s)
    p = 0.5 + order
    coef = (1.0, -1.0 / 8.0, 3.0 / 64.0)[order]
    tmax = math.asinh(0.5 * math.pi / sig)

    def integrand(t):
        phi = sig * math.sinh(t)
        sn = math.sin(phi)
        return (1.0 - 2.0 * sn * sn) / (sn * sn + sig * sig) ** p * sig * math.cosh(t)

    return coef * _quad(integrand, 0.0, tmax, spec, "cosine form", s)


# ---------------------------------------------------------------------------
# Table construction
# ---------------------------------------------------------------------------

def _far_coefficients(nterms: int) -> np.ndarray:
    # F(s) = sum_{k>=1} a_k s^(-1/2-k) for s > 4, from the binomial series of
    # (1 + (2 - 2cos t)/s)^(-1/2) and int_0^pi cos t (2-2cos t)^k dt
    # = -pi * C(2k, k-1).
    k = np.arange(1, nterms + 1)
    return scipy.special.binom(-0.5, k) * (-np.pi) * scipy.special.comb(2 * k, k - 1)


def build_table(path: str | Path | None = None, n_panels: int = 48,
                degree: int = 12, near_zero_degree: int = 4,
                spec: QuadratureSpec = DEFAULT_ORACLE_SPEC) -> dict:
    """Fill the fast-evaluator table from the oracle.

    Parameters
    ----------
    path : path-like, optional
        Where to write the ``.npz`` table; nothing is written if omitted.
    n_panels, degree : int
        Chebyshev panels on ``log s`` over ``[TABLE_LO, TABLE_HI]`` and
        polynomial degree per panel.
    near_zero_degree : int
        Number of correction orders in ``F = P(s) log s + Q(s)``.

    Returns
    -------
    dict
        Arrays of the table, keyed as stored on disk.
    """
    cheb = np.polynomial.chebyshev
    u0, u1 = math.log(TABLE_LO), math.log(TABLE_HI)
    edges = np.linspace(u0, u1, n_panels + 1)
    coef = np.zeros((3, n_panels, degree + 1))
    oracles = (f_oracle, f_prime_oracle, f_second_oracle)
    for p in range(n_panels):
        a, b = edges[p], edges[p + 1]
        for k in range(3):
            def fn(x, k=k, a=a, b=b):
                s = np.exp(0.5 * (a + b) + 0.5 * (b - a) * x)
                return oracles[k](s, spec) * s ** k
            coef[k, p] = cheb.chebinterpolate(fn, degree)

    # Small-s fit of the remainder after the two known leading terms.
    s_fit = np.geomspace(1e-10, NEAR_ZERO_FIT_MAX, 160)
    resid = f_oracle(s_fit, spec) - (-0.5 * np.log(s_fit) + LOG8_MINUS_2)
    n = near_zero_degree
    t = s_fit / NEAR_ZERO_FIT_MAX
    cols = [t ** j * np.log(s_fit) for j in range(1, n + 1)]
    cols += [t ** j for j in range(1, n + 1)]
    sol, *_ = np.linalg.lstsq(np.stack(cols, axis=1), resid, rcond=None)
    scale = NEAR_ZERO_FIT_MAX ** -np.arange(1, n + 1, dtype=float)
    p_coef = np.concatenate([[-0.5], sol[:n] * scale])
    q_coef = np.concatenate([[LOG8_MINUS_2], sol[n:] * scale])

    table = {
        "cheb": coef,
        "u_edges": edges,
        "nz_p": p_coef,
        "nz_q": q_coef,
        "far_a": _far_coefficients(N_FAR_TERMS),
    }
    if path is not None:
        np.savez(path, **table)
    return table


def _load_table() -> dict:
    ref = resources.files("axieuler") / "data" / _TABLE_FILE
    with resources.as_file(ref) as p:
        if not Path(p).exists():
            # First use from a fresh checkout: fill the table from the oracle.
            build_table(p)
        with np.load(p) as data:
            return {k: np.ascontiguousarray(data[k]) for k in data.files}


_TABLE = _load_table()
_CHEB = _TABLE["cheb"]
_U0 = float(_TABLE["u_edges"][0])
_DU = float(_TABLE["u_edges"][1] - _TABLE["u_edges"][0])
_NPAN = _CHEB.shape[1]
_NZ_P = _TABLE["nz_p"]
_NZ_Q = _TABLE["nz_q"]
_FAR_A = _TABLE["far_a"]
_LO = DEFAULT_REGIME.switch_lo
_HI = DEFAULT_REGIME.switch_hi


# ---------------------------------------------------------------------------
# Fast scalar kernels (numba)
# ---------------------------------------------------------------------------

@numba.njit(cache=True, inline="always")
def _clenshaw(c, x):
    b1 = 0.0
    b2 = 0.0
    x2 = 2.0 * x
    for i in range(c.shape[0] - 1, 0, -1):
        b1, b2 = c[i] + x2 * b1 - b2, b1
    return c[0] + x * b1 - b2


@numba.njit(cache=True)
def _near_zero(s, order):
    lg = math.log(s)
    n = _NZ_P.shape[0]
    p = 0.0
    dp = 0.0
    ddp = 0.0
    q = 0.0
    dq = 0.0
    ddq = 0.0
    for i in range(n - 1, -1, -1):
        ddp = ddp * s + 2.0 * dp
        dp = dp * s + p
        p = p * s + _NZ_P[i]
        ddq = ddq * s + 2.0 * dq
        dq = dq * s + q
        q = q * s + _NZ_Q[i]
    f0 = p * lg + q
    f1 = dp * lg + p / s + dq
    f2 = 0.0
    if order > 1:
        f2 = ddp * lg + 2.0 * dp / s - p / (s * s) + ddq
    return f0, f1, f2


@numba.njit(cache=True)
def _mid(s, order):
    u = math.log(s)
    k = int((u - _U0) / _DU)
    if k < 0:
        k = 0
    elif k >= _NPAN:
        k = _NPAN - 1
    x = 2.0 * (u - _U0 - k * _DU) / _DU - 1.0
    f0 = _clenshaw(_CHEB[0, k], x)
    f1 = _clenshaw(_CHEB[1, k], x) / s
    f2 = 0.0
    if order > 1:
        f2 = _clenshaw(_CHEB[2, k], x) / (s * s)
    return f0, f1, f2


@numba.njit(cache=True)
def _far(s, order):
    x = 1.0 / s
    n = _FAR_A.shape[0]
    f0 = 0.0
    f1 = 0.0
    f2 = 0.0
    for i in range(n - 1, -1, -1):
        k = i + 1.0
        f0 = f0 * x + _FAR_A[i]
        f1 = f1 * x + _FAR_A[i] * (-0.5 - k)
        f2 = f2 * x + _FAR_A[i] * (0.5 + k) * (1.5 + k)
    r = math.sqrt(x)
    f0 *= r * x
    f1 *= r * x * x
    f2 *= r * x * x * x
    return f0, f1, f2


@numba.njit(cache=True)
def _eval(s, lo, hi, order):
    if s < lo:
        return _near_zero(s, order)
    if s > hi:
        return _far(s, order)
    return _mid(s, order)


@numba.njit(cache=True)
def f01(s):
    """(F, F') at scalar ``s > 0`` with the default switch points."""
    f0, f1, _ = _eval(s, _LO, _HI, 1)
    return f0, f1


@numba.njit(cache=True)
def f012(s):
    """(F, F', F'') at scalar ``s > 0`` with the default switch points."""
    return _eval(s, _LO, _HI, 2)


@numba.njit(cache=True)
def _eval_array(s, lo, hi, out):
    for i in range(s.shape[0]):
        f0, f1, f2 = _eval(s[i], lo, hi, 2)
        out[0, i] = f0
        out[1, i] = f1
        out[2, i] = f2


def f_all(s, regime: FRegime = DEFAULT_REGIME):
    """Fast (F, F', F'') for array-like ``s``.

    Returns
    -------
    tuple of three arrays (or floats for scalar input)
    """
    s = _check_positive(s)
    flat = np.ascontiguousarray(s.ravel())
    out = np.empty((3, flat.size))
    _eval_array(flat, regime.switch_lo, regime.switch_hi, out)
    if s.ndim == 0:
        return float(out[0, 0]), float(out[1, 0]), float(out[2, 0])
    return tuple(out[k].reshape(s.shape) for k in range(3))


def f_fast(s, regime: FRegime = DEFAULT_REGIME):
    """Fast evaluation of F(s).

    Parameters
    ----------
    s : float or array_like
        Positive arguments.
    regime : FRegime
        Switch points between the three evaluation branches.

    Raises
    ------
    SpecfunDomainError
        If any ``s <= 0``.
    """
    return f_all(s, regime)[0]


def f_prime(s, regime: FRegime = DEFAULT_REGIME):
    """Fast evaluation of F'(s)."""
    return f_all(s, regime)[1]


def f_second(s, regime: FRegime = DEFAULT_REGIME):
    """Fast evaluation of F''(s)."""
    return f_all(s, regime)[2]


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def verify_f_bounds(samples, tau: float = 0.5) -> dict:
    """Fitted constants for the two-sided power bounds on F and derivatives.

    For each order k the ratio ``|F^(k)(s)| / min(s^-a_k, s^-(k+3/2))`` is
    formed with ``a_0 = tau`` and ``a_k = k`` otherwise, and its maximum over
    the samples is reported as the constant ``C_k``.

    Parameters
    ----------
    samples : sequence of float
        Positive sample points (nonempty).
    tau : float
        Small-s exponent used for ``k = 0``.

    Returns
    -------
    dict
        ``{"C": [C0, C1, C2], "argmax": [...], "passed": bool, "n": int}``.
    """
    s = _check_positive(np.atleast_1d(np.asarray(samples, dtype=float)))
    if s.size == 0:
        raise ValueError("samples must be nonempty")
    vals = f_all(s)
    consts, where = [], []
    for k in range(3):
        small = s ** (-(tau if k == 0 else k))
        large = s ** (-(k + 1.5))
        ratio = np.abs(vals[k]) / np.minimum(small, large)
        i = int(np.argmax(ratio))
        consts.append(float(ratio[i]))
        where.append(float(s[i]))
    passed = all(np.isfinite(c) for c in consts)
    return {"C": consts, "argmax": where, "passed": bool(passed), "n": int(s.size)}


def asymptotic_table() -> dict:
    """Leading asymptotic coefficients recovered from the fast evaluator.

    Returns measured and expected values at s = 1e-8 and s = 1e8.
    """
    lo, hi = 1e-8, 1e8
    f0, f1, f2 = f_all(np.array([lo, hi]))
    rows = {
        "F + log(s)/2 at 0": (f0[0] + 0.5 * math.log(lo), LOG8_MINUS_2),
        "F s^(3/2) at inf": (f0[1] * hi ** 1.5, math.pi / 2),
        "F' s at 0": (f1[0] * lo, -0.5),
        "F' s^(5/2) at inf": (f1[1] * hi ** 2.5, -3 * math.pi / 4),
        "F'' s^2 at 0": (f2[0] * lo ** 2, 0.5),
        "F'' s^(7/2) at inf": (f2[1] * hi ** 3.5, 15 * math.pi / 8),
    }
    return {k: {"measured": float(m), "expected": float(e),
                "rel_err": float(abs(m - e) / abs(e))} for k, (m, e) in rows.items()}


def _main(argv=None):
    import argparse
    parser = argparse.ArgumentParser(prog="python -m axieuler.specfun")
    parser.add_argument("command", choices=["build-table"])
    parser.add_argument("--out", default=None)
    args = parser.parse_args(argv)
    out = args.out
    if out is None:
        out = Path(__file__).with_name("data") / _TABLE_FILE
    build_table(out)
    print(f"wrote {out}")


if __name__ == "__main__":
    _main()
