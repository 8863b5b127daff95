"""Quadrature and bracketed root finding used by the bound modules.

Both kernels delegate the heavy lifting to SciPy (QUADPACK and Brent's method)
and add the plumbing the rest of the package relies on: a monotone map for
semi-infinite ranges, decade breakpoints so that long truncation ranges are
resolved near their left end, an evaluation budget, and typed results.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import BracketError, DivergenceError, NonConvergence

__all__ = [
    "DEFAULT_TOL",
    "DEFAULT_BUDGET",
    "MAX_ROOT_ITERATIONS",
    "QuadratureResult",
    "RootResult",
    "integrate",
    "find_root",
]

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
DEFAULT_BUDGET = 10**6
MAX_ROOT_ITERATIONS = 200

# QUADPACK relative target; acceptance is looser because its error estimates
# are pessimistic on integrable endpoint singularities.
_QUAD_RTOL = 1e-11
_ACCEPT_RTOL = 1e-6
_KRONROD_POINTS = 21
_MAX_SUBINTERVALS = 4000
_DECADES = 12


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float
    evaluations: int


@dataclass(frozen=True)
class RootResult:
    root: float
    bracket: tuple
    iterations: int
    converged: bool


def _finite_breakpoints(lo, hi):
    """Decade-spaced points lo + (hi - lo) * 10^-k strictly inside (lo, hi)."""
    width = hi - lo
    points = {lo + width * 10.0 ** (-k) for k in range(1, _DECADES + 1)}
    return sorted(p for p in points if lo < p < hi)


def _unit_breakpoints():
    near_zero = {10.0 ** (-k) for k in range(1, 9)}
    near_one = {1.0 - 10.0 ** (-k) for k in range(1, _DECADES + 1)}
    return sorted(p for p in near_zero | near_one if 0.0 < p < 1.0)


def _run_quad(g, a, b, points, tol, budget):
    limit = max(len(points) + 2, min(budget // (2 * _KRONROD_POINTS), _MAX_SUBINTERVALS))
    out = quad(
        g, a, b,
        points=points,
        limit=limit,
        epsabs=tol,
        epsrel=_QUAD_RTOL,
        full_output=1,
    )
    value, abs_err, info = out[0], out[1], out[2]
    message = out[3] if len(out) > 3 else None
    return float(value), float(abs_err), int(info.get("neval", 0)), message


def integrate(f: Callable[[float], float], lo: float, hi: float,
              tol: float = DEFAULT_TOL, budget: int = DEFAULT_BUDGET) -> QuadratureResult:
    """Integrate ``f`` over ``[lo, hi]``; ``hi`` may be ``math.inf``.

    Semi-infinite ranges are mapped to [0, 1) with u = (t - lo) / (1 + t - lo).

    Raises:
        NonConvergence: error estimate above tolerance or budget exhausted.
        DivergenceError: the integral evaluated to a non-finite number.
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if math.isinf(lo):
        raise ValueError("lower limit must be finite")
    if hi == lo:
        return QuadratureResult(0.0, 0.0, 1)
    if hi < lo:
        res = integrate(f, hi, lo, tol, budget)
        return QuadratureResult(-res.value, res.abs_error_estimate, res.evaluations)

    if math.isinf(hi):
        def g(u):
            one_minus = 1.0 - u
            return f(lo + u / one_minus) / (one_minus * one_minus)

        value, abs_err, neval, message = _run_quad(g, 0.0, 1.0, _unit_breakpoints(), tol, budget)
    else:
        value, abs_err, neval, message = _run_quad(f, lo, hi, _finite_breakpoints(lo, hi), tol, budget)

    if not np.isfinite(value):
        raise DivergenceError(f"integral over [{lo}, {hi}] is not finite")
    accepted = max(tol, _ACCEPT_RTOL * abs(value))
    if abs_err > accepted or neval > budget:
        raise NonConvergence(
            f"quadrature over [{lo}, {hi}] stopped at error {abs_err:.3g} "
            f"after {neval} evaluations ({message or 'budget exhausted'})"
        )
    if message:
        logger.debug("quadrature note on [%s, %s]: %s", lo, hi, message)
    return QuadratureResult(value, abs_err, max(neval, 1))


def find_root(g: Callable[[float], float], lo: float, hi: float,
              tol: float = 1e-14, maxiter: int = MAX_ROOT_ITERATIONS) -> RootResult:
    """Brent's method (bisection with safeguarded interpolation) on ``[lo, hi]``.

    Raises:
        BracketError: g(lo) and g(hi) have the same sign.
        NonConvergence: maxiter reached.
    """
    if hi < lo:
        lo, hi = hi, lo
    g_lo, g_hi = g(lo), g(hi)
    if not (np.isfinite(g_lo) and np.isfinite(g_hi)):
        raise BracketError(f"non-finite residual at bracket ends: g({lo})={g_lo}, g({hi})={g_hi}")
    if g_lo == 0.0:
        return RootResult(lo, (lo, hi), 0, True)
    if g_hi == 0.0:
        return RootResult(hi, (lo, hi), 0, True)
    if g_lo * g_hi > 0.0:
        raise BracketError(f"no sign change on [{lo}, {hi}]: g(lo)={g_lo:.6g}, g(hi)={g_hi:.6g}")

    root, info = brentq(g, lo, hi, xtol=tol, maxiter=maxiter, full_output=True, disp=False)
    if not info.converged:
        raise NonConvergence(f"root finding on [{lo}, {hi}] did not converge in {maxiter} iterations")
    root = min(max(float(root), lo), hi)
    return RootResult(root, (lo, hi), int(info.iterations), True)
