"""Tail-capturing functions I(t) and the reference distributions they capture.

A tail-capturing function satisfies P(X > t) <= exp(-I(t)). Each reference
distribution (Exponential, Weibull, Pareto) is matched to a family whose I is
exactly -log P(X > t) on the support, so it captures the tail both pointwise
and in the limit.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.special import gamma as gamma_fn

from .errors import DomainError, InvalidFamily, TableFormatError
from .numerics import integrate

__all__ = [
    "TailFamily",
    "GrowthClass",
    "DistributionKind",
    "TailFunction",
    "ReferenceDistribution",
    "TABULATED_RATIO_CHANGE",
    "eval_I",
    "basic_rate",
    "classify_growth",
    "matched_tail",
    "ratio_nonincreasing",
    "ratio_bound_certified",
    "load_tabulated_csv",
]

logger = logging.getLogger(__name__)

# Relative drop of I(t)/t between the last two grid points that marks a
# tabulated tail as sub-linear.
TABULATED_RATIO_CHANGE = 0.01


class TailFamily(str, Enum):
    SUB_EXPONENTIAL = "SubExponential"
    SUB_WEIBULL = "SubWeibull"
    POLYNOMIAL = "Polynomial"
    TABULATED = "Tabulated"


class GrowthClass(str, Enum):
    LINEAR_ORDER = "LinearOrder"
    SUB_LINEAR = "SubLinear"


class DistributionKind(str, Enum):
    EXPONENTIAL = "Exponential"
    WEIBULL = "Weibull"
    PARETO = "Pareto"


@dataclass(frozen=True)
class TailFunction:
    """A tail-capturing function with its family tag and parameters.

    Use the constructors (``sub_exponential``, ``sub_weibull``, ``polynomial``,
    ``tabulated``) rather than the raw initializer.
    """

    family: TailFamily
    k: float = None
    alpha: float = None
    c_alpha: float = None
    gamma: float = None
    grid_t: tuple = ()
    grid_I: tuple = ()
    domain_floor: float = 0.0

    def __post_init__(self):
        if self.family is TailFamily.SUB_EXPONENTIAL:
            if self.k is None or not self.k > 0:
                raise DomainError(f"SubExponential rate must be > 0, got {self.k}")
        elif self.family is TailFamily.SUB_WEIBULL:
            if self.alpha is None or not self.alpha >= 1:
                raise DomainError(f"SubWeibull shape must be >= 1, got {self.alpha}")
            if self.c_alpha is None or not self.c_alpha > 0:
                raise DomainError(f"SubWeibull coefficient must be > 0, got {self.c_alpha}")
        elif self.family is TailFamily.POLYNOMIAL:
            if self.gamma is None or not self.gamma > 2:
                raise DomainError(
                    f"Polynomial exponent must be > 2 (finite variance), got {self.gamma}"
                )
            if self.domain_floor < 1:
                raise DomainError("Polynomial tails are defined for t >= 1")
        elif self.family is TailFamily.TABULATED:
            _check_grid(self.grid_t, self.grid_I)

    @classmethod
    def sub_exponential(cls, k):
        return cls(TailFamily.SUB_EXPONENTIAL, k=float(k))

    @classmethod
    def sub_weibull(cls, alpha, c_alpha):
        return cls(TailFamily.SUB_WEIBULL, alpha=float(alpha), c_alpha=float(c_alpha))

    @classmethod
    def polynomial(cls, gamma, domain_floor=1.0):
        return cls(TailFamily.POLYNOMIAL, gamma=float(gamma), domain_floor=float(domain_floor))

    @classmethod
    def tabulated(cls, pairs):
        pairs = [(float(t), float(v)) for t, v in pairs]
        grid_t = tuple(t for t, _ in pairs)
        grid_I = tuple(v for _, v in pairs)
        floor = grid_t[0] if grid_t else 0.0
        return cls(TailFamily.TABULATED, grid_t=grid_t, grid_I=grid_I, domain_floor=floor)

    def describe(self):
        """Family tag and parameters as a plain dict."""
        params = {
            TailFamily.SUB_EXPONENTIAL: {"k": self.k},
            TailFamily.SUB_WEIBULL: {"alpha": self.alpha, "c_alpha": self.c_alpha},
            TailFamily.POLYNOMIAL: {"gamma": self.gamma},
            TailFamily.TABULATED: {"points": len(self.grid_t)},
        }[self.family]
        return {"family": self.family.value, "domain_floor": self.domain_floor, **params}


def _check_grid(grid_t, grid_I, lines=None):
    if len(grid_t) != len(grid_I):
        raise DomainError("tabulated grid columns differ in length")
    if len(grid_t) < 2:
        raise DomainError("tabulated grid needs at least two points")
    line_of = (lambda i: lines[i]) if lines else (lambda i: None)
    for i in range(1, len(grid_t)):
        if not grid_t[i] > grid_t[i - 1]:
            raise TableFormatError(f"t must be strictly increasing ({grid_t[i - 1]} then {grid_t[i]})", line_of(i))
        if grid_I[i] < grid_I[i - 1]:
            raise TableFormatError(f"I must be nondecreasing ({grid_I[i - 1]} then {grid_I[i]})", line_of(i))
    if grid_I[0] < 0:
        raise TableFormatError("I must be nonnegative", line_of(0))


def eval_I(f: TailFunction, t: float) -> float:
    """Evaluate I(t); tabulated tails interpolate linearly inside the grid."""
    if not t >= f.domain_floor:
        raise DomainError(f"t={t} is below the domain floor {f.domain_floor} of {f.family.value}")
    if f.family is TailFamily.SUB_EXPONENTIAL:
        return f.k * t
    if f.family is TailFamily.SUB_WEIBULL:
        return f.c_alpha * t ** (1.0 / f.alpha)
    if f.family is TailFamily.POLYNOMIAL:
        return f.gamma * math.log(t)
    if t > f.grid_t[-1]:
        raise DomainError(f"t={t} is beyond the tabulated range ending at {f.grid_t[-1]}")
    return float(np.interp(t, f.grid_t, f.grid_I))


def classify_growth(f: TailFunction) -> GrowthClass:
    if f.family is TailFamily.SUB_EXPONENTIAL:
        return GrowthClass.LINEAR_ORDER
    if f.family is TailFamily.SUB_WEIBULL:
        return GrowthClass.LINEAR_ORDER if f.alpha == 1 else GrowthClass.SUB_LINEAR
    if f.family is TailFamily.POLYNOMIAL:
        return GrowthClass.SUB_LINEAR
    # heuristic: compare I(t)/t at the last two grid points with t > 0
    positive = [(t, i) for t, i in zip(f.grid_t, f.grid_I) if t > 0]
    if len(positive) < 2:
        return GrowthClass.LINEAR_ORDER
    (t_prev, i_prev), (t_last, i_last) = positive[-2:]
    r_prev, r_last = i_prev / t_prev, i_last / t_last
    if r_last < r_prev * (1.0 - TABULATED_RATIO_CHANGE):
        return GrowthClass.SUB_LINEAR
    return GrowthClass.LINEAR_ORDER


def ratio_nonincreasing(f: TailFunction) -> bool:
    """Whether I(t)/t is (eventually) nonincreasing.

    Polynomial tails qualify from t = e onwards, where log(t)/t peaks.
    Tabulated tails are checked on their grid points.
    """
    if f.family in (TailFamily.SUB_EXPONENTIAL, TailFamily.SUB_WEIBULL, TailFamily.POLYNOMIAL):
        return True
    ratios = [v / t for t, v in zip(f.grid_t, f.grid_I) if t > 0]
    return all(b <= a * (1.0 + 1e-12) for a, b in zip(ratios, ratios[1:]))


def ratio_bound_certified(f: TailFunction, lo: float, L: float) -> bool:
    """True when I(L)/L <= I(s)/s for every s in [lo, L].

    This is the only use the ratio bound makes of "I(t)/t nonincreasing".
    """
    if L <= lo:
        return True
    if f.family is TailFamily.SUB_EXPONENTIAL:
        return True
    if f.family is TailFamily.SUB_WEIBULL:
        return f.alpha >= 1
    lo = max(lo, f.domain_floor)
    if lo <= 0:
        return False
    target = eval_I(f, L) / L
    if f.family is TailFamily.POLYNOMIAL:
        # log(s)/s is unimodal, so its minimum over [lo, L] sits at an end
        return target <= eval_I(f, lo) / lo * (1.0 + 1e-12)
    inside = [s for s in f.grid_t if lo <= s <= L] + [lo]
    return all(target <= eval_I(f, s) / s * (1.0 + 1e-12) for s in inside)


@dataclass(frozen=True)
class ReferenceDistribution:
    """Exponential(k), Weibull(alpha, c_alpha) or Pareto(gamma, floor=1).

    Survival functions are exp(-I(t)) for the matched tail function; moments
    are closed-form and the negative-part moment is computed once by
    quadrature.
    """

    kind: DistributionKind
    k: float = None
    alpha: float = None
    c_alpha: float = None
    gamma: float = None
    floor: float = field(default=0.0)

    def __post_init__(self):
        if self.kind is DistributionKind.EXPONENTIAL and not (self.k and self.k > 0):
            raise DomainError(f"Exponential rate must be > 0, got {self.k}")
        if self.kind is DistributionKind.WEIBULL:
            if not (self.alpha and self.alpha >= 1) or not (self.c_alpha and self.c_alpha > 0):
                raise DomainError(f"Weibull needs alpha >= 1 and c_alpha > 0, got {self.alpha}, {self.c_alpha}")
        if self.kind is DistributionKind.PARETO and not (self.gamma and self.gamma > 2):
            raise DomainError(f"Pareto needs gamma > 2 for finite variance, got {self.gamma}")

    @classmethod
    def exponential(cls, k):
        return cls(DistributionKind.EXPONENTIAL, k=float(k))

    @classmethod
    def weibull(cls, alpha, c_alpha):
        return cls(DistributionKind.WEIBULL, alpha=float(alpha), c_alpha=float(c_alpha))

    @classmethod
    def pareto(cls, gamma):
        return cls(DistributionKind.PARETO, gamma=float(gamma), floor=1.0)

    @property
    def _scale(self):
        # Weibull scale s with X = s * E^alpha, E ~ Exp(1)
        return self.c_alpha ** (-self.alpha)

    @property
    def mean(self):
        if self.kind is DistributionKind.EXPONENTIAL:
            return 1.0 / self.k
        if self.kind is DistributionKind.WEIBULL:
            return self._scale * gamma_fn(1.0 + self.alpha)
        return self.gamma / (self.gamma - 1.0)

    @property
    def second_moment(self):
        if self.kind is DistributionKind.EXPONENTIAL:
            return 2.0 / self.k ** 2
        if self.kind is DistributionKind.WEIBULL:
            return self._scale ** 2 * gamma_fn(1.0 + 2.0 * self.alpha)
        return self.gamma / (self.gamma - 2.0)

    @property
    def variance(self):
        return self.second_moment - self.mean ** 2

    @cached_property
    def neg_second_moment(self):
        """sigma_-^2 = E[(X - EX)^2 1(X <= EX)]."""
        mu = self.mean
        res = integrate(lambda x: (x - mu) ** 2 * self.density(x), self.floor, mu)
        logger.debug("neg_second_moment of %s = %.12g", self.describe(), res.value)
        return res.value

    def log_survival(self, t):
        """log P(X > t), vectorised; 0 below the support floor."""
        t = np.asarray(t, dtype=float)
        above = np.maximum(t, self.floor)
        if self.kind is DistributionKind.EXPONENTIAL:
            out = -self.k * above
        elif self.kind is DistributionKind.WEIBULL:
            out = -self.c_alpha * above ** (1.0 / self.alpha)
        else:
            out = -self.gamma * np.log(above)
        out = np.where(t < self.floor, 0.0, out)
        return out if out.ndim else float(out)

    def survival(self, t):
        return np.exp(self.log_survival(t))

    def log_density(self, x):
        """Log of the probability density; scalar in, scalar out."""
        if x < self.floor:
            return -math.inf
        if self.kind is DistributionKind.EXPONENTIAL:
            return math.log(self.k) - self.k * x
        if self.kind is DistributionKind.WEIBULL:
            if x == 0.0:
                return math.inf if self.alpha > 1 else math.log(self.c_alpha)
            root = x ** (1.0 / self.alpha)
            return (math.log(self.c_alpha / self.alpha) + (1.0 / self.alpha - 1.0) * math.log(x)
                    - self.c_alpha * root)
        return math.log(self.gamma) - (self.gamma + 1.0) * math.log(x)

    def density(self, x):
        return math.exp(self.log_density(x))

    def quantile(self, v):
        """Inverse survival: the x with P(X > x) = v, for v in (0, 1]."""
        v = np.asarray(v, dtype=float)
        if self.kind is DistributionKind.EXPONENTIAL:
            return -np.log(v) / self.k
        if self.kind is DistributionKind.WEIBULL:
            return (-np.log(v) / self.c_alpha) ** self.alpha
        return v ** (-1.0 / self.gamma)

    def describe(self):
        params = {
            DistributionKind.EXPONENTIAL: {"k": self.k},
            DistributionKind.WEIBULL: {"alpha": self.alpha, "c_alpha": self.c_alpha},
            DistributionKind.PARETO: {"gamma": self.gamma, "floor": self.floor},
        }[self.kind]
        return {
            "kind": self.kind.value,
            **params,
            "mean": self.mean,
            "variance": self.variance,
        }


def basic_rate(d: ReferenceDistribution, t: float) -> float:
    """I_br(t) = -log P(X > t)."""
    if not t >= d.floor:
        raise DomainError(f"t={t} is below the support floor {d.floor} of {d.kind.value}")
    return -float(d.log_survival(t))


def matched_tail(d: ReferenceDistribution) -> TailFunction:
    """The tail function whose exp(-I) is the survival function of ``d``."""
    if d.kind is DistributionKind.EXPONENTIAL:
        return TailFunction.sub_exponential(d.k)
    if d.kind is DistributionKind.WEIBULL:
        return TailFunction.sub_weibull(d.alpha, d.c_alpha)
    if d.kind is DistributionKind.PARETO:
        return TailFunction.polynomial(d.gamma, domain_floor=d.floor)
    raise InvalidFamily(f"no matched tail for {d.kind}")


def load_tabulated_csv(path) -> TailFunction:
    """Load a two-column ``t,I`` CSV into a tabulated tail function.

    Raises:
        TableFormatError: with the offending line number.
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, skip_blank_lines=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise TableFormatError("file is empty", line=1)
    except pd.errors.ParserError as e:
        raise TableFormatError(f"could not parse {path.name}: {e}")

    columns = [str(c).strip() for c in frame.columns]
    if columns != ["t", "I"]:
        raise TableFormatError(f"header must be 't,I', found '{','.join(columns)}'", line=1)

    pairs = []
    lines = []
    for line, (t_raw, i_raw) in enumerate(frame.to_numpy(), start=2):
        if pd.isna(t_raw) and pd.isna(i_raw):
            continue
        try:
            t_val = float(t_raw)
            i_val = float(i_raw)
        except (TypeError, ValueError):
            raise TableFormatError(f"non-numeric value(s) '{t_raw}', '{i_raw}'", line=line)
        if not (math.isfinite(t_val) and math.isfinite(i_val)):
            raise TableFormatError("values must be finite", line=line)
        pairs.append((t_val, i_val))
        lines.append(line)

    if len(pairs) < 2:
        raise TableFormatError("at least two data rows are required", line=len(frame) + 1)
    _check_grid([t for t, _ in pairs], [v for _, v in pairs], lines)
    return TailFunction.tabulated(pairs)
