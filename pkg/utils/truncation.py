"""Truncated-variable constants: k_{L,lambda} and the c_{L,beta} family.

With X^L = X * 1(X <= L) and Z^L = X^L - EX,

    c_{L,beta} = E[(Z^L)^2 1(Z^L <= 0)] + E[(Z^L)^2 exp(lambda Z^L) 1(Z^L > 0)]

for lambda = beta * I(L) / L. Four estimates are provided, ordered so that

    exact <= ratio bound <= closed form

holds whenever the closed form applies. A ``*_c_provider`` wraps each one as a
callable ``(L, beta) -> CBetaEstimate`` for the concentration module.
"""

import logging
import math
import threading
from dataclasses import dataclass
from enum import Enum

from scipy.special import gamma as gamma_fn

from .errors import DomainError, InvalidFamily
from .numerics import integrate
from .tail_model import (
    ReferenceDistribution,
    TailFamily,
    TailFunction,
    basic_rate,
    eval_I,
    ratio_bound_certified,
)

logger = logging.getLogger(__name__)

# |beta - (1 - 2/gamma)| below this selects the special polynomial branch
BRANCH_TOL = 1e-12


class CBetaMethod(str, Enum):
    EXACT_QUADRATURE = "ExactQuadrature"
    RATIO_BOUND = "RatioBound"
    CLOSED_FORM_SUBEXP = "ClosedFormSubExp"
    CLOSED_FORM_SUBWEIBULL = "ClosedFormSubWeibull"
    CLOSED_FORM_POLYNOMIAL = "ClosedFormPolynomial"
    CONSTANT = "Constant"


@dataclass(frozen=True)
class TruncationParams:
    L: float
    beta: float
    lam: float

    def __post_init__(self):
        if not self.L > 0:
            raise DomainError(f"truncation level must be > 0, got {self.L}")
        if not 0 < self.beta <= 1:
            raise DomainError(f"beta must lie in (0, 1], got {self.beta}")
        if not self.lam >= 0:
            raise DomainError(f"lambda must be >= 0, got {self.lam}")

    @classmethod
    def from_tail(cls, f: TailFunction, L: float, beta: float):
        """Couple lambda = beta * I(L) / L."""
        if not L > 0:
            raise DomainError(f"truncation level must be > 0, got {L}")
        return cls(L=float(L), beta=float(beta), lam=beta * eval_I(f, L) / L)


@dataclass(frozen=True)
class CBetaEstimate:
    value: float
    method: CBetaMethod
    neg_part: float
    pos_part: float

    def to_dict(self):
        return {
            "value": self.value,
            "method": self.method.value,
            "neg_part": self.neg_part,
            "pos_part": self.pos_part,
        }


def _neg_part(d: ReferenceDistribution, L: float) -> float:
    """E[(Z^L)^2 1(Z^L <= 0)], including the atom Z^L = -EX on {X > L}."""
    mu = d.mean
    atom = mu * mu * float(d.survival(L)) if math.isfinite(L) else 0.0
    if L >= mu:
        return d.neg_second_moment + atom
    if L <= d.floor:
        return atom
    res = integrate(lambda x: (x - mu) ** 2 * d.density(x), d.floor, L)
    return res.value + atom


def _tilted_pos_part(d: ReferenceDistribution, L: float, lam: float) -> float:
    """E[(X - EX)^2 exp(lam (X - EX)) 1(EX < X <= L)] against the density."""
    mu = d.mean
    if L <= mu:
        return 0.0

    def integrand(x):
        z = x - mu
        return z * z * math.exp(lam * z + d.log_density(x))

    return integrate(integrand, mu, L).value


def k_L_lambda(d: ReferenceDistribution, L: float, lam: float) -> float:
    """k_{L,lambda}, the quadratic coefficient of the truncated MGF bound.

    ``L`` may be ``math.inf`` when the tilted moment converges.
    """
    if not lam >= 0:
        raise DomainError(f"lambda must be >= 0, got {lam}")
    if not L > 0:
        raise DomainError(f"truncation level must be > 0, got {L}")
    return _neg_part(d, L) + _tilted_pos_part(d, L, lam)


def log_mgf_truncated(d: ReferenceDistribution, L: float, lam: float) -> float:
    """log E[exp(lam (X^L - EX))] by quadrature."""
    mu = d.mean
    lower = d.floor
    body = 0.0
    if L > lower:
        body = integrate(lambda x: math.exp(lam * (x - mu) + d.log_density(x)), lower, L).value
    atom = float(d.survival(L)) * math.exp(-lam * mu) if math.isfinite(L) else 0.0
    return math.log(body + atom)


def c_beta_exact(d: ReferenceDistribution, p: TruncationParams) -> CBetaEstimate:
    neg = _neg_part(d, p.L)
    pos = _tilted_pos_part(d, p.L, p.lam)
    return CBetaEstimate(neg + pos, CBetaMethod.EXACT_QUADRATURE, neg, pos)


def pos_part_survival_form(d: ReferenceDistribution, p: TruncationParams) -> float:
    """Survival-function form of the positive part.

    integral_0^{L-EX} exp(lam t - I_br(t + EX)) (2t + lam t^2) dt, which
    bounds the density form from above by the mass P(X > L) it ignores.
    """
    mu = d.mean
    if p.L <= mu:
        return 0.0

    def integrand(t):
        return math.exp(p.lam * t - basic_rate(d, t + mu)) * (2.0 * t + p.lam * t * t)

    return integrate(integrand, 0.0, p.L - mu).value


def c_beta_ratio_bound(d: ReferenceDistribution, f: TailFunction,
                       p: TruncationParams) -> CBetaEstimate:
    """Upper bound on c_{L,beta} valid when I(t)/t is nonincreasing.

    exp(-beta EX I(L)/L) integral_0^{L-EX} exp(-(1-beta) I(t+EX)) (2t + beta (I(L)/L) t^2) dt

    Raises:
        InvalidFamily: I(L)/L <= I(s)/s cannot be certified on [EX, L].
    """
    if p.beta >= 1:
        raise DomainError("the ratio bound needs beta < 1")
    mu = d.mean
    neg = _neg_part(d, p.L)
    if p.L <= mu:
        return CBetaEstimate(neg, CBetaMethod.RATIO_BOUND, neg, 0.0)
    if not ratio_bound_certified(f, mu, p.L):
        raise InvalidFamily(
            f"I(t)/t is not certified nonincreasing on [{mu:.6g}, {p.L:.6g}] for {f.family.value}"
        )
    slope = eval_I(f, p.L) / p.L
    beta = p.beta

    def integrand(t):
        return math.exp(-(1.0 - beta) * eval_I(f, t + mu)) * (2.0 * t + beta * slope * t * t)

    pos = math.exp(-beta * mu * slope) * integrate(integrand, 0.0, p.L - mu).value
    return CBetaEstimate(neg + pos, CBetaMethod.RATIO_BOUND, neg, pos)


def _require_beta_below_one(beta):
    if not 0 < beta < 1:
        raise DomainError(f"closed forms need beta in (0, 1), got {beta}")


def closed_form_subexp(d: ReferenceDistribution, k: float, beta: float,
                       mean: float = None) -> CBetaEstimate:
    """sigma_-^2 + 2 / ((1-beta)^3 k^2 e^{k EX}); independent of L."""
    _require_beta_below_one(beta)
    mu = d.mean if mean is None else mean
    neg = d.neg_second_moment
    pos = 2.0 / ((1.0 - beta) ** 3 * k * k * math.exp(k * mu))
    return CBetaEstimate(neg + pos, CBetaMethod.CLOSED_FORM_SUBEXP, neg, pos)


def closed_form_subweibull(sigma_minus_sq: float, alpha: float, c_alpha: float,
                           beta: float, L: float) -> CBetaEstimate:
    _require_beta_below_one(beta)
    if alpha < 1:
        raise DomainError(f"alpha must be >= 1, got {alpha}")
    a = (1.0 - beta) * c_alpha
    quadratic = gamma_fn(2.0 * alpha + 1.0) / a ** (2.0 * alpha)
    cubic = (L ** (1.0 / alpha - 1.0) * beta * c_alpha * gamma_fn(3.0 * alpha + 1.0)
             / (3.0 * a ** (3.0 * alpha)))
    pos = quadratic + cubic
    return CBetaEstimate(sigma_minus_sq + pos, CBetaMethod.CLOSED_FORM_SUBWEIBULL, sigma_minus_sq, pos)


def closed_form_polynomial(sigma_minus_sq: float, gamma: float, beta: float,
                           L: float) -> CBetaEstimate:
    """Polynomial-tail closed form; two branches split at beta = 1 - 2/gamma."""
    if not gamma > 2:
        raise DomainError(f"gamma must be > 2, got {gamma}")
    if not 0 < beta <= 1:
        raise DomainError(f"beta must lie in (0, 1], got {beta}")
    if not L > 1:
        raise DomainError(f"L must be > 1, got {L}")

    log_L = math.log(L)
    # contribution of (0, 1]; equals e^lambda with lambda = beta I(L) / L
    segment = L ** (gamma * beta / L)

    if abs(beta - (1.0 - 2.0 / gamma)) <= BRANCH_TOL:
        pos = segment + 2.0 * log_L + 0.5 * (gamma - 2.0) * log_L ** 2
    else:
        e = 2.0 - gamma * (1.0 - beta)
        power = L ** e
        pos = (segment
               + (2.0 - gamma * beta / e) / e * (power - 1.0)
               + gamma * beta * power * log_L / e)
    return CBetaEstimate(sigma_minus_sq + pos, CBetaMethod.CLOSED_FORM_POLYNOMIAL, sigma_minus_sq, pos)


def closed_form_for(d: ReferenceDistribution, f: TailFunction, p: TruncationParams,
                    mean: float = None) -> CBetaEstimate:
    """Dispatch to the closed form that matches the tail family."""
    if f.family is TailFamily.SUB_EXPONENTIAL:
        return closed_form_subexp(d, f.k, p.beta, mean=mean)
    if f.family is TailFamily.SUB_WEIBULL:
        return closed_form_subweibull(d.neg_second_moment, f.alpha, f.c_alpha, p.beta, p.L)
    if f.family is TailFamily.POLYNOMIAL:
        return closed_form_polynomial(d.neg_second_moment, f.gamma, p.beta, p.L)
    raise InvalidFamily(f"no closed form for {f.family.value} tails")


class _MemoProvider:
    """Thread-safe (L, beta) -> CBetaEstimate cache around a compute function."""

    name = None

    def __init__(self):
        self._cache = {}
        self._lock = threading.Lock()

    def _compute(self, L, beta):
        raise NotImplementedError

    def __call__(self, L, beta):
        key = (float(L), float(beta))
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        value = self._compute(*key)
        logger.debug("%s c_(L=%.6g, beta=%s) = %.6g", self.name, key[0], key[1], value.value)
        with self._lock:
            self._cache.setdefault(key, value)
        return value


class ExactCProvider(_MemoProvider):
    name = "exact"

    def __init__(self, d: ReferenceDistribution, f: TailFunction):
        super().__init__()
        self.d = d
        self.f = f

    def _compute(self, L, beta):
        return c_beta_exact(self.d, TruncationParams.from_tail(self.f, L, beta))


class RatioCProvider(_MemoProvider):
    name = "ratio"

    def __init__(self, d: ReferenceDistribution, f: TailFunction):
        super().__init__()
        self.d = d
        self.f = f

    def _compute(self, L, beta):
        return c_beta_ratio_bound(self.d, self.f, TruncationParams.from_tail(self.f, L, beta))


class ClosedFormCProvider(_MemoProvider):
    name = "closed"

    def __init__(self, d: ReferenceDistribution, f: TailFunction, mean: float = None):
        super().__init__()
        self.d = d
        self.f = f
        self.mean = mean

    def _compute(self, L, beta):
        return closed_form_for(self.d, self.f, TruncationParams.from_tail(self.f, L, beta), mean=self.mean)


class ConstantCProvider:
    """The same c for every (L, beta); substitutes a certified upper bound."""

    name = "constant"

    def __init__(self, value: float):
        if not value >= 0:
            raise DomainError(f"constant c must be >= 0, got {value}")
        self.estimate = CBetaEstimate(float(value), CBetaMethod.CONSTANT, 0.0, float(value))

    def __call__(self, L, beta):
        return self.estimate


def exact_c_provider(d, f):
    return ExactCProvider(d, f)


def ratio_c_provider(d, f):
    return RatioCProvider(d, f)


def closed_form_c_provider(d, f, mean=None):
    return ClosedFormCProvider(d, f, mean=mean)


def constant_c_provider(value):
    return ConstantCProvider(value)


PROVIDERS = {
    "exact": exact_c_provider,
    "ratio": ratio_c_provider,
    "closed": closed_form_c_provider,
}


def all_estimates(d: ReferenceDistribution, f: TailFunction, L: float, beta: float,
                  mean: float = None):
    """Every applicable c_{L,beta} estimate, keyed by method, for side-by-side reports.

    Methods whose preconditions fail are reported as ``{'error': ...}``.
    """
    p = TruncationParams.from_tail(f, L, beta)
    out = {}
    attempts = [
        (CBetaMethod.EXACT_QUADRATURE, lambda: c_beta_exact(d, p)),
        (CBetaMethod.RATIO_BOUND, lambda: c_beta_ratio_bound(d, f, p)),
        ("ClosedForm", lambda: closed_form_for(d, f, p, mean=mean)),
    ]
    for label, compute in attempts:
        try:
            est = compute()
            out[est.method.value] = est.to_dict()
        except (DomainError, InvalidFamily) as e:
            key = label.value if isinstance(label, CBetaMethod) else label
            out[key] = {"error": f"{type(e).__name__}: {e}"}
    return out
