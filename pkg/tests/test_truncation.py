import math

import pytest

from utils.errors import DomainError, InvalidFamily
from utils.tail_model import ReferenceDistribution, TailFunction, matched_tail
from utils.truncation import (
    PROVIDERS,
    CBetaMethod,
    TruncationParams,
    all_estimates,
    c_beta_exact,
    c_beta_ratio_bound,
    closed_form_for,
    closed_form_polynomial,
    closed_form_subexp,
    closed_form_subweibull,
    constant_c_provider,
    k_L_lambda,
    log_mgf_truncated,
    pos_part_survival_form,
)

FAMILIES = [
    ReferenceDistribution.exponential(1.0),
    ReferenceDistribution.weibull(2.0, 1.0),
    ReferenceDistribution.pareto(3.0),
]


def params(d, L, beta):
    return TruncationParams.from_tail(matched_tail(d), L, beta)


class TestTruncationParams:
    def test_lambda_coupling(self, subweibull_tail):
        p = TruncationParams.from_tail(subweibull_tail, 100.0, 0.5)
        assert p.lam == pytest.approx(0.5 * 10.0 / 100.0)

    @pytest.mark.parametrize("L, beta", [(0.0, 0.5), (10.0, 0.0), (10.0, 1.5)])
    def test_invalid(self, subweibull_tail, L, beta):
        with pytest.raises(DomainError):
            TruncationParams.from_tail(subweibull_tail, L, beta)


class TestExponentialClosedForm:
    """Exponential(1), beta = 0.5, L = 50: lambda = 0.5 and the tilted moment is 16/e."""

    def test_exact_positive_part(self, exponential):
        est = c_beta_exact(exponential, params(exponential, 50.0, 0.5))
        assert est.method is CBetaMethod.EXACT_QUADRATURE
        assert 5.886 * (1 - 1e-4) <= est.pos_part <= 5.8861
        assert est.neg_part == pytest.approx(1.0 - 2.0 / math.e, rel=1e-6)

    def test_closed_form_total(self, exponential):
        closed = closed_form_subexp(exponential, 1.0, 0.5)
        assert closed.value == pytest.approx(6.1504, abs=1e-3)
        assert closed.method is CBetaMethod.CLOSED_FORM_SUBEXP

    def test_ordering(self, exponential):
        p = params(exponential, 50.0, 0.5)
        exact = c_beta_exact(exponential, p).value
        ratio = c_beta_ratio_bound(exponential, matched_tail(exponential), p).value
        closed = closed_form_for(exponential, matched_tail(exponential), p).value
        assert exact <= ratio + 1e-8
        assert ratio <= closed + 1e-8

    def test_mean_override(self, exponential):
        shifted = closed_form_subexp(exponential, 1.0, 0.5, mean=2.0)
        assert shifted.pos_part == pytest.approx(16.0 / math.e ** 2)

    def test_beta_one_rejected(self, exponential):
        with pytest.raises(DomainError):
            closed_form_subexp(exponential, 1.0, 1.0)


@pytest.mark.parametrize("d, L, beta", [
    (ReferenceDistribution.weibull(2.0, 1.0), 1e4, 0.5),
    (ReferenceDistribution.weibull(3.0, 2.0), 500.0, 0.3),
    (ReferenceDistribution.pareto(3.0), 100.0, 0.3),
    (ReferenceDistribution.pareto(4.0), 1e3, 0.3),
])
def test_exact_ratio_closed_ordering(d, L, beta):
    f = matched_tail(d)
    p = TruncationParams.from_tail(f, L, beta)
    exact = c_beta_exact(d, p).value
    ratio = c_beta_ratio_bound(d, f, p).value
    closed = closed_form_for(d, f, p).value
    assert exact <= ratio * (1 + 1e-9)
    assert ratio <= closed * (1 + 1e-9)


class TestSubWeibullClosedForm:
    def test_value(self):
        est = closed_form_subweibull(1.0, 2.0, 1.0, 0.5, 1e4)
        # Gamma(5) / 0.5^4 + 10^-2 * 0.5 * Gamma(7) / (3 * 0.5^6)
        assert est.pos_part == pytest.approx(384.0 + 76.8, rel=1e-12)
        assert est.value == pytest.approx(1.0 + 460.8, rel=1e-12)

    def test_decreases_in_L(self):
        small = closed_form_subweibull(1.0, 2.0, 1.0, 0.5, 1e2).value
        large = closed_form_subweibull(1.0, 2.0, 1.0, 0.5, 1e6).value
        assert large < small


class TestPolynomialClosedForm:
    def test_branches_agree_at_the_split(self):
        gamma, L = 3.0, 100.0
        split = 1.0 - 2.0 / gamma
        special = closed_form_polynomial(0.1, gamma, split, L).value
        below = closed_form_polynomial(0.1, gamma, split - 1e-6, L).value
        above = closed_form_polynomial(0.1, gamma, split + 1e-6, L).value
        assert below == pytest.approx(special, rel=1e-3)
        assert above == pytest.approx(special, rel=1e-3)

    def test_special_branch_value(self):
        gamma, L = 4.0, math.e ** 2
        est = closed_form_polynomial(0.0, gamma, 0.5, L)
        segment = L ** (gamma * 0.5 / L)
        assert est.pos_part == pytest.approx(segment + 4.0 + 4.0, rel=1e-12)

    @pytest.mark.parametrize("L", [1.5, math.e, 10.0, 1e4])
    def test_segment_is_e_to_lambda(self, L, caplog):
        gamma, beta = 3.0, 0.2
        est = closed_form_polynomial(0.0, gamma, beta, L)
        lam = beta * gamma * math.log(L) / L
        e = 2.0 - gamma * (1.0 - beta)
        rest = ((2.0 - gamma * beta / e) / e * (L ** e - 1.0)
                + gamma * beta * L ** e * math.log(L) / e)
        assert est.pos_part - rest == pytest.approx(math.exp(lam), rel=1e-10)
        assert not [r for r in caplog.records if r.levelname == "WARNING"]

    def test_beta_one_allowed(self):
        assert math.isfinite(closed_form_polynomial(0.1, 3.0, 1.0, 50.0).value)

    @pytest.mark.parametrize("gamma, beta, L", [(2.0, 0.5, 10.0), (3.0, 0.0, 10.0), (3.0, 0.5, 1.0)])
    def test_invalid(self, gamma, beta, L):
        with pytest.raises(DomainError):
            closed_form_polynomial(0.1, gamma, beta, L)


def test_no_closed_form_for_tabulated(exponential):
    f = TailFunction.tabulated([(0.0, 0.0), (100.0, 100.0)])
    with pytest.raises(InvalidFamily):
        closed_form_for(exponential, f, TruncationParams.from_tail(f, 50.0, 0.5))


def test_ratio_bound_not_certified(pareto):
    f = matched_tail(pareto)
    with pytest.raises(InvalidFamily):
        c_beta_ratio_bound(pareto, f, TruncationParams.from_tail(f, 2.0, 0.3))


def test_k_L_lambda_matches_exact(weibull):
    p = params(weibull, 400.0, 0.5)
    assert k_L_lambda(weibull, p.L, p.lam) == pytest.approx(c_beta_exact(weibull, p).value, rel=1e-12)


@pytest.mark.parametrize("d", FAMILIES)
@pytest.mark.parametrize("L, lam", [(10.0, 0.1), (10.0, 0.5), (50.0, 0.2), (100.0, 0.05), (20.0, 1.0)])
def test_truncated_mgf_bound(d, L, lam):
    log_mgf = log_mgf_truncated(d, L, lam)
    bound = 0.5 * k_L_lambda(d, L, lam) * lam * lam
    assert bound - log_mgf >= -1e-8


class TestSurvivalForm:
    def test_exponential_agrees_with_density_form(self, exponential):
        p = params(exponential, 50.0, 0.5)
        exact = c_beta_exact(exponential, p)
        assert pos_part_survival_form(exponential, p) == pytest.approx(exact.pos_part, rel=1e-6)

    @pytest.mark.parametrize("d", FAMILIES)
    def test_dominates_density_form(self, d):
        p = params(d, 50.0, 0.5)
        assert pos_part_survival_form(d, p) >= c_beta_exact(d, p).pos_part * (1 - 1e-9)

    def test_truncation_below_mean(self, weibull):
        p = params(weibull, 1.0, 0.5)
        assert pos_part_survival_form(weibull, p) == 0.0
        assert c_beta_exact(weibull, p).pos_part == 0.0


@pytest.mark.parametrize("d, beta", [
    (ReferenceDistribution.weibull(2.0, 1.0), 0.5),
    (ReferenceDistribution.pareto(4.0), 0.3),
])
def test_converges_to_variance(d, beta):
    f = matched_tail(d)
    gaps = [abs(c_beta_exact(d, TruncationParams.from_tail(f, L, beta)).value - d.variance)
            for L in (1e2, 1e3, 1e4, 1e5)]
    assert all(b <= a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 0.05 * d.variance


class TestProviders:
    def test_memoised(self, weibull, subweibull_tail):
        provider = PROVIDERS["exact"](weibull, subweibull_tail)
        first = provider(200.0, 0.5)
        assert provider(200.0, 0.5) is first
        assert provider.name == "exact"

    def test_closed_provider_mean(self, exponential):
        f = matched_tail(exponential)
        provider = PROVIDERS["closed"](exponential, f, mean=2.0)
        assert provider(10.0, 0.5).pos_part == pytest.approx(16.0 / math.e ** 2)

    def test_constant(self):
        provider = constant_c_provider(3.5)
        est = provider(1e9, 0.1)
        assert est.value == 3.5
        assert est.method is CBetaMethod.CONSTANT

    def test_constant_rejects_negative(self):
        with pytest.raises(DomainError):
            constant_c_provider(-1.0)


class TestAllEstimates:
    def test_exponential(self, exponential):
        out = all_estimates(exponential, matched_tail(exponential), 50.0, 0.5)
        assert set(out) == {"ExactQuadrature", "RatioBound", "ClosedFormSubExp"}
        assert out["ExactQuadrature"]["value"] <= out["ClosedFormSubExp"]["value"]

    def test_failures_are_reported(self, exponential):
        out = all_estimates(exponential, matched_tail(exponential), 50.0, 1.0)
        assert "value" in out["ExactQuadrature"]
        assert "DomainError" in out["RatioBound"]["error"]
        assert "DomainError" in out["ClosedForm"]["error"]
