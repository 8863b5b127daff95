"""Two-regime concentration bound for centred i.i.d. sums.

For S_m = X_1 + ... + X_m and a tail function I with I(t) = O(t),

    P(S_m - E S_m > m t) <= exp(-c_t beta I(mt)) + m exp(-I(mt))           t >= t_max
    P(S_m - E S_m > m t) <= exp(-m t^2 / (2c)) + m exp(-m t_max^2 / (beta c))   t < t_max

where t_max is the largest t with t <= beta c_{mt,beta} I(mt) / (mt) and
c_t = 1 - beta c_{mt,beta} I(mt) / (2 t mt). The c_{L,beta} value comes from a
provider (see ``utils.truncation``) so that any certified upper bound can be
substituted for the exact constant.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from scipy.stats import norm

from .errors import DivergentC, DomainError, InvalidFamily, NonConvergence, NotCertified, ThresholdError
from .numerics import find_root
from .tail_model import DistributionKind, ReferenceDistribution, TailFamily, TailFunction, eval_I, matched_tail
from .truncation import CBetaEstimate, CBetaMethod, TruncationParams, c_beta_exact

logger = logging.getLogger(__name__)

SCAN_POINTS = 64
MAX_DOUBLINGS = 200
SMALLEST_T = 1e-12
# c_t below 1/2 by less than this is rounding at t = t_max
C_T_SNAP = 1e-9
# brentq stops on its relative tolerance (4 eps) instead
_ROOT_XTOL = 1e-300


class Regime(str, Enum):
    HEAVY_TAIL = "HeavyTail"
    GAUSSIAN_LIKE = "GaussianLike"


@dataclass(frozen=True)
class ConcentrationBound:
    regime: Regime
    t_max: float
    c_t: float
    exp_term: float
    union_term: float
    total: float
    c_beta_used: Optional[CBetaEstimate]
    m: int
    t: float
    beta: float
    L: float
    rate_at_L: float

    @property
    def total_clamped(self):
        return min(self.total, 1.0)


def _c_value(c_provider, L, beta):
    est = c_provider(L, beta)
    if not math.isfinite(est.value):
        raise DivergentC(f"c_(L={L:.6g}, beta={beta}) is not finite ({est.method.value})")
    return est


def _scan_start(f: TailFunction, m: int) -> float:
    if f.domain_floor > 0:
        return max(SMALLEST_T, f.domain_floor / m * (1.0 + 1e-9))
    return SMALLEST_T


def solve_t_max(f: TailFunction, c_provider, m: int, beta: float) -> float:
    """Largest t with t <= beta c_{mt,beta} I(mt) / (mt); 0 when there is none.

    Raises:
        NonConvergence: no t_hi with g(t_hi) > 0 was found by doubling.
    """
    if m < 1:
        raise DomainError(f"m must be >= 1, got {m}")
    if not 0 < beta <= 1:
        raise DomainError(f"beta must lie in (0, 1], got {beta}")

    def g(t):
        L = m * t
        c = _c_value(c_provider, L, beta).value
        return t - beta * c * eval_I(f, L) / L

    start = _scan_start(f, m)
    t_hi = max(1.0, 2.0 * start)
    for _ in range(MAX_DOUBLINGS):
        if g(t_hi) > 0:
            break
        t_hi *= 2.0
    else:
        raise NonConvergence(f"t_max bracket did not close after {MAX_DOUBLINGS} doublings (t_hi={t_hi:.3g})")

    grid = np.geomspace(start, t_hi, SCAN_POINTS)
    values = [g(t) for t in grid]
    last = None
    for i in range(len(grid) - 1):
        if values[i] <= 0 < values[i + 1]:
            last = i
    if last is None:
        logger.debug("t_max set is empty for %s, m=%d, beta=%s", f.family.value, m, beta)
        return 0.0
    return find_root(g, float(grid[last]), float(grid[last + 1]), tol=_ROOT_XTOL).root


def bound(f: TailFunction, c_provider, m: int, t: float, beta: float,
          t_max: float = None) -> ConcentrationBound:
    """Evaluate the two-regime bound at deviation ``t`` (per summand).

    ``t_max`` may be passed in when it has already been solved for the same
    (f, c_provider, m, beta).
    """
    if not t >= 0:
        raise DomainError(f"t must be >= 0, got {t}")
    if t_max is None:
        t_max = solve_t_max(f, c_provider, m, beta)

    if t >= t_max:
        if t == 0:
            raise DomainError("t = 0 with an empty t_max set leaves no truncation level")
        L = m * t
        if L < f.domain_floor:
            return _below_floor(f, m, t, beta, t_max)
        est = _c_value(c_provider, L, beta)
        rate = eval_I(f, L)
        c_t = 1.0 - beta * est.value * rate / (2.0 * t * L)
        if 0.5 - C_T_SNAP < c_t < 0.5:
            c_t = 0.5
        elif c_t < 0.5:
            logger.warning("c_t = %.6g below 1/2 at t=%.6g (t_max=%.6g); scan missed a root", c_t, t, t_max)
        exp_term = math.exp(-c_t * beta * rate)
        union_term = m * math.exp(-rate)
        regime = Regime.HEAVY_TAIL
    else:
        L = m * t_max
        est = _c_value(c_provider, L, beta)
        rate = eval_I(f, L)
        c = est.value
        exp_term = math.exp(-m * t * t / (2.0 * c))
        union_term = m * math.exp(-m * t_max * t_max / (beta * c))
        c_t = None
        regime = Regime.GAUSSIAN_LIKE

    result = ConcentrationBound(
        regime=regime, t_max=t_max, c_t=c_t,
        exp_term=exp_term, union_term=union_term, total=exp_term + union_term,
        c_beta_used=est, m=m, t=t, beta=beta, L=L, rate_at_L=rate,
    )
    if regime is Regime.GAUSSIAN_LIKE:
        residual = gaussian_union_residual(result)
        if residual > 1e-8 * max(union_term, 1e-300):
            logger.info("Gaussian union term differs from m*exp(-I(m t_max)) by %.3g", residual)
    return result


def _below_floor(f, m, t, beta, t_max) -> ConcentrationBound:
    """Trivial bound for m t below the domain floor, where I is taken as 0."""
    logger.debug("m*t = %.6g below the domain floor %.6g of %s; trivial bound", m * t,
                 f.domain_floor, f.family.value)
    return ConcentrationBound(
        regime=Regime.HEAVY_TAIL, t_max=t_max, c_t=None,
        exp_term=1.0, union_term=float(m), total=1.0 + m,
        c_beta_used=None, m=m, t=t, beta=beta, L=m * t, rate_at_L=0.0,
    )


def gaussian_union_residual(b: ConcentrationBound) -> float:
    """|m exp(-I(m t_max)) - union_term|; zero at an exact fixed point."""
    if b.regime is not Regime.GAUSSIAN_LIKE:
        return 0.0
    return abs(b.m * math.exp(-b.rate_at_L) - b.union_term)


def subweibull_t_max(alpha, c_alpha, c, beta, m):
    """(beta c c_alpha)^{alpha/(2 alpha-1)} m^{-(alpha-1)/(2 alpha-1)}."""
    denom = 2.0 * alpha - 1.0
    return (beta * c * c_alpha) ** (alpha / denom) * m ** (-(alpha - 1.0) / denom)


def bound_subweibull_asymptotic(alpha, c_alpha, sigma_sq, epsilon, beta, m, t,
                                C_epsilon) -> ConcentrationBound:
    """SubWeibull bound with the constant c = sigma^2 + epsilon, valid for mt > C_epsilon."""
    if not alpha > 1:
        raise DomainError(f"alpha must be > 1, got {alpha}")
    if not 0 < beta < 1:
        raise DomainError(f"beta must lie in (0, 1), got {beta}")
    if not m * t > C_epsilon:
        raise ThresholdError(f"m*t = {m * t:.6g} does not exceed C_epsilon = {C_epsilon:.6g}")

    c = sigma_sq + epsilon
    est = CBetaEstimate(c, CBetaMethod.CONSTANT, 0.0, c)
    t_max = subweibull_t_max(alpha, c_alpha, c, beta, m)
    if t >= t_max:
        L = m * t
        rate = c_alpha * L ** (1.0 / alpha)
        c_t = 1.0 - 0.5 * beta * c * c_alpha * m ** (1.0 / alpha - 1.0) * t ** (1.0 / alpha - 2.0)
        if 0.5 - C_T_SNAP < c_t < 0.5:
            c_t = 0.5
        exp_term = math.exp(-c_t * beta * rate)
        union_term = m * math.exp(-rate)
        regime = Regime.HEAVY_TAIL
    else:
        L = m * t_max
        rate = c_alpha * L ** (1.0 / alpha)
        c_t = None
        exp_term = math.exp(-m * t * t / (2.0 * c))
        union_term = m * math.exp(-m * t_max * t_max / (beta * c))
        regime = Regime.GAUSSIAN_LIKE
    return ConcentrationBound(
        regime=regime, t_max=t_max, c_t=c_t,
        exp_term=exp_term, union_term=union_term, total=exp_term + union_term,
        c_beta_used=est, m=m, t=t, beta=beta, L=L, rate_at_L=rate,
    )


def certify_C_epsilon(d: ReferenceDistribution, beta, epsilon, L_grid) -> float:
    """Smallest grid L from which c_beta_exact(L) <= Var + epsilon holds on the rest of the grid.

    The certificate is empirical: it only speaks for the grid it was given.
    """
    f = matched_tail(d)
    if d.kind is DistributionKind.WEIBULL:
        if not d.alpha > 1:
            raise InvalidFamily("C_epsilon needs a Weibull shape alpha > 1")
    elif d.kind is DistributionKind.PARETO:
        if not beta < 1.0 - 2.0 / d.gamma:
            raise InvalidFamily(f"C_epsilon needs beta < 1 - 2/gamma = {1.0 - 2.0 / d.gamma:.6g}")
    else:
        raise InvalidFamily(f"C_epsilon is not defined for {d.kind.value}")

    limit = d.variance + epsilon
    grid = sorted(float(L) for L in L_grid)
    ok = [c_beta_exact(d, TruncationParams.from_tail(f, L, beta)).value <= limit for L in grid]
    certified = None
    for i in range(len(grid) - 1, -1, -1):
        if not ok[i]:
            break
        certified = grid[i]
    if certified is None:
        raise NotCertified(f"no grid point has c_(L,{beta}) <= Var + {epsilon:.6g} = {limit:.6g}")
    logger.info("C_epsilon = %.6g (empirical certificate on %d grid points)", certified, len(grid))
    return certified


def default_beta(f: TailFunction) -> float:
    if f.family is TailFamily.POLYNOMIAL:
        return max(0.5 * (1.0 - 2.0 / f.gamma), 0.01)
    return 0.9


def gaussian_tail_reference(m, gamma_m, sigma_sq) -> float:
    """-log of the Gaussian tail P(N > gamma_m / (sigma sqrt(m)))."""
    return -float(norm.logsf(gamma_m / math.sqrt(sigma_sq * m)))


def bound_to_dict(b: ConcentrationBound) -> dict:
    return {
        "regime": b.regime.value,
        "t_max": b.t_max,
        "c_t": b.c_t,
        "exp_term": b.exp_term,
        "union_term": b.union_term,
        "total": b.total,
        "total_clamped": b.total_clamped,
        "c_beta_used": b.c_beta_used.to_dict() if b.c_beta_used else None,
        "params": {"m": b.m, "t": b.t, "beta": b.beta},
        "L": b.L,
        "I_at_L": b.rate_at_L,
    }
