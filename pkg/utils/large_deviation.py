"""Large-deviation ratio checks for deviation sequences gamma_m = a m^p (log m)^q.

For super-exponential tails (I(t) = o(t)) and sequences with
log m << I(gamma_m) << gamma_m^2 / m the ratio

    -log P(S_m - E S_m > gamma_m) / I(gamma_m)

tends to 1: one large summand carries the deviation. Polynomial tails use
the denominator gamma log(gamma_m) - log m instead. Ratios here are measured
by Monte Carlo, so the checks are trend checks over an m grid.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import pandas as pd

from .concentration import bound, default_beta
from .errors import ConditionError, DomainError, FamilyError, InvalidFamily, RareEventError
from .montecarlo import EmpiricalTail, MonteCarloConfig, estimate_tail
from .tail_model import DistributionKind, ReferenceDistribution, TailFamily, TailFunction, eval_I
from .truncation import exact_c_provider

logger = logging.getLogger(__name__)

# finite-m stand-in for "<<": both ratios decreasing and the last one below this
ADMISSIBLE_THRESHOLD = 0.2
BOUNDARY_TOL = 1e-9
# points whose predicted probability is below RARE_EVENT_COUNT / n_samples are skipped
RARE_EVENT_COUNT = 10
ADMISSIBILITY_POLICY = f"both ratios strictly decreasing and < {ADMISSIBLE_THRESHOLD} at the largest m"
CSV_COLUMNS = ["m", "gamma_m", "p_hat", "ci_lo", "ci_hi", "denominator", "ratio"]


class BoundaryClass(str, Enum):
    BELOW = "BelowBoundary"
    NEAR = "NearBoundary"
    ABOVE = "AboveBoundary"


@dataclass(frozen=True)
class DeviationSequence:
    a: float
    p: float
    q: float = 0.0

    def __post_init__(self):
        if not self.a > 0:
            raise DomainError(f"sequence scale a must be > 0, got {self.a}")

    def __call__(self, m):
        return self.a * m ** self.p * math.log(m) ** self.q

    def describe(self):
        return {"a": self.a, "p": self.p, "q": self.q}


@dataclass
class Admissibility:
    admissible: bool
    log_ratio: list
    variance_ratio: list
    policy: str = ADMISSIBILITY_POLICY


@dataclass
class LDPoint:
    m: int
    gamma_m: float
    denominator: float
    tail: EmpiricalTail = None
    ratio: float = math.nan
    ratio_ci: tuple = (math.nan, math.nan)
    predicted: float = math.nan
    skipped: str = None


@dataclass
class LDCheckResult:
    m_grid: list
    ratios: list
    admissible: bool
    boundary_class: BoundaryClass
    points: list = field(default_factory=list)
    denominator_kind: str = "I(gamma_m)"
    condition: str = None


def _strictly_decreasing(values):
    return all(b < a for a, b in zip(values, values[1:]))


def check_admissible(f: TailFunction, s: DeviationSequence, m_grid) -> Admissibility:
    """Finite-m check of log m << I(gamma_m) << gamma_m^2 / m.

    Raises:
        FamilyError: for polynomial tails, which go through ``ld_poly_limit``.
        InvalidFamily: for tails without a certified o(t) growth.
    """
    if f.family is TailFamily.POLYNOMIAL:
        raise FamilyError("polynomial tails use ld_poly_limit (denominator gamma log gamma_m - log m)")
    if not (f.family is TailFamily.SUB_WEIBULL and f.alpha > 1):
        raise InvalidFamily(f"{f.family.value} is not certified super-exponential")
    grid = sorted(int(m) for m in m_grid)
    if len(grid) < 2:
        raise DomainError("admissibility needs at least two grid points")
    log_ratio, variance_ratio = [], []
    for m in grid:
        g = s(m)
        rate = eval_I(f, g)
        log_ratio.append(math.log(m) / rate)
        variance_ratio.append(m * rate / (g * g))
    admissible = (
        _strictly_decreasing(log_ratio) and _strictly_decreasing(variance_ratio)
        and log_ratio[-1] < ADMISSIBLE_THRESHOLD and variance_ratio[-1] < ADMISSIBLE_THRESHOLD
    )
    return Admissibility(admissible, log_ratio, variance_ratio)


def classify_boundary(alpha: float, s: DeviationSequence) -> BoundaryClass:
    """Place gamma_m relative to m^{alpha/(2 alpha - 1)}."""
    if not alpha > 1:
        raise DomainError(f"alpha must be > 1, got {alpha}")
    edge = alpha / (2.0 * alpha - 1.0)
    if abs(s.p - edge) <= BOUNDARY_TOL:
        return BoundaryClass.NEAR
    return BoundaryClass.ABOVE if s.p > edge else BoundaryClass.BELOW


def poly_condition(s: DeviationSequence) -> str:
    """Which growth condition gamma_m satisfies for polynomial tails.

    "i": log m / log gamma_m tends to 1/p < 2. "ii": the limit is 2 and
    gamma_m / sqrt(m log m) = a (log m)^{q - 1/2} grows without bound.

    Raises:
        ConditionError: neither holds.
    """
    if s.p > 0.5 + BOUNDARY_TOL:
        return "i"
    if abs(s.p - 0.5) <= BOUNDARY_TOL and s.q > 0.5:
        return "ii"
    raise ConditionError(
        f"gamma_m = {s.a} m^{s.p} (log m)^{s.q} does not grow faster than sqrt(m log m)"
    )


def classify_poly_boundary(s: DeviationSequence) -> BoundaryClass:
    """Place gamma_m relative to sqrt(m log m)."""
    if abs(s.p - 0.5) <= BOUNDARY_TOL:
        if abs(s.q - 0.5) <= BOUNDARY_TOL:
            return BoundaryClass.NEAR
        return BoundaryClass.ABOVE if s.q > 0.5 else BoundaryClass.BELOW
    return BoundaryClass.ABOVE if s.p > 0.5 else BoundaryClass.BELOW


def ld_upper_bound(f: TailFunction, c_beta: float, m: int, gamma_m: float, beta: float) -> float:
    """exp(-beta I + beta^2 c m I^2 / (2 gamma_m^2)) + m exp(-I) with I = I(gamma_m)."""
    rate = eval_I(f, gamma_m)
    exponent = -beta * rate + 0.5 * beta * beta * c_beta * m * rate * rate / (gamma_m * gamma_m)
    return math.exp(min(exponent, 0.0)) + m * math.exp(-rate)


def _predict(f, provider, m, gamma_m, beta):
    return bound(f, provider, m, gamma_m / m, beta).total_clamped


def _measure(d, f, s, m_grid, mc, denominator, beta, c_provider):
    beta = default_beta(f) if beta is None else beta
    provider = c_provider or exact_c_provider(d, f)
    floor_p = RARE_EVENT_COUNT / mc.n_samples
    points = []
    for i, m in enumerate(sorted(int(m) for m in m_grid)):
        g = s(m)
        point = LDPoint(m=m, gamma_m=g, denominator=denominator(m, g))
        point.predicted = _predict(f, provider, m, g, beta)
        if point.predicted < floor_p:
            err = RareEventError(
                f"m={m}: predicted P <= {point.predicted:.3g} is below {floor_p:.3g}"
            )
            point.skipped = str(err)
            logger.warning("skipping grid point: %s", err)
            points.append(point)
            continue
        point.tail = estimate_tail(d, m, g, mc, stream_key=(i,))
        lo, hi = point.tail.ci
        if point.tail.p_hat > 0:
            point.ratio = -math.log(point.tail.p_hat) / point.denominator
        else:
            point.ratio = math.inf
        point.ratio_ci = (
            -math.log(hi) / point.denominator,
            -math.log(lo) / point.denominator if lo > 0 else math.inf,
        )
        points.append(point)
    return points


def ld_ratio(d: ReferenceDistribution, f: TailFunction, s: DeviationSequence, m_grid,
             mc: MonteCarloConfig, beta: float = None, c_provider=None) -> LDCheckResult:
    """Measure -log P-hat(S_m - E S_m > gamma_m) / I(gamma_m) over ``m_grid``.

    Denominators use ``eval_I`` of ``f``. Inadmissible sequences are measured
    anyway and flagged; grid points the bound predicts to be unobservable are
    skipped and flagged.
    """
    admissible = check_admissible(f, s, m_grid).admissible
    points = _measure(d, f, s, m_grid, mc, lambda m, g: eval_I(f, g), beta, c_provider)
    return LDCheckResult(
        m_grid=[p.m for p in points],
        ratios=[p.ratio for p in points],
        admissible=admissible,
        boundary_class=classify_boundary(f.alpha, s),
        points=points,
    )


def ld_poly_limit(gamma: float, s: DeviationSequence, m_grid, d: ReferenceDistribution,
                  mc: MonteCarloConfig, beta: float = None, c_provider=None) -> LDCheckResult:
    """Polynomial-tail ratio with denominator gamma log(gamma_m) - log m."""
    if d.kind is not DistributionKind.PARETO or d.gamma != gamma:
        raise InvalidFamily(f"ld_poly_limit needs Pareto(gamma={gamma}), got {d.describe()}")
    condition = poly_condition(s)
    f = TailFunction.polynomial(gamma, domain_floor=d.floor)

    def denominator(m, g):
        return gamma * math.log(g) - math.log(m)

    points = _measure(d, f, s, m_grid, mc, denominator, beta, c_provider)
    return LDCheckResult(
        m_grid=[p.m for p in points],
        ratios=[p.ratio for p in points],
        admissible=True,
        boundary_class=classify_poly_boundary(s),
        points=points,
        denominator_kind="gamma log(gamma_m) - log m",
        condition=condition,
    )


def one_sample_lower_bound(d: ReferenceDistribution, m: int, gamma_m: float,
                           cfg: MonteCarloConfig, stream_key=(0,)):
    """P(X > gamma_m) * P-hat(S_{m-1} - E S_{m-1} >= EX).

    Returns (value, (lo, hi)) with the interval carried over from the
    estimate of the second factor.
    """
    if m < 2:
        raise DomainError("the single-summand lower bound needs m >= 2")
    single = float(d.survival(gamma_m))
    rest = estimate_tail(d, m - 1, d.mean, cfg, stream_key=stream_key)
    return single * rest.p_hat, (single * rest.ci[0], single * rest.ci[1])


def trend_ok(result: LDCheckResult) -> bool:
    """|ratio - 1| nonincreasing along the measured points, up to CI half-widths."""
    measured = [p for p in result.points if p.skipped is None and math.isfinite(p.ratio)]
    for prev, cur in zip(measured, measured[1:]):
        allowance = _half_width(prev) + _half_width(cur)
        if abs(cur.ratio - 1.0) > abs(prev.ratio - 1.0) + allowance:
            return False
    return True


def _half_width(point):
    lo, hi = point.ratio_ci
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return 0.0
    return 0.5 * (hi - lo)


def ld_result_rows(result: LDCheckResult):
    rows = []
    for p in result.points:
        rows.append({
            "m": p.m,
            "gamma_m": p.gamma_m,
            "p_hat": p.tail.p_hat if p.tail else math.nan,
            "ci_lo": p.tail.ci[0] if p.tail else math.nan,
            "ci_hi": p.tail.ci[1] if p.tail else math.nan,
            "denominator": p.denominator,
            "ratio": p.ratio,
        })
    return rows


def ld_result_frame(result: LDCheckResult) -> pd.DataFrame:
    return pd.DataFrame(ld_result_rows(result), columns=CSV_COLUMNS)


def ld_summary(result: LDCheckResult) -> dict:
    return {
        "m_grid": result.m_grid,
        "ratios": result.ratios,
        "admissible": result.admissible,
        "admissibility_policy": ADMISSIBILITY_POLICY,
        "boundary_class": result.boundary_class.value,
        "denominator": result.denominator_kind,
        "condition": result.condition,
        "trend_ok": trend_ok(result),
        "skipped": [{"m": p.m, "reason": p.skipped} for p in result.points if p.skipped],
    }
