import math

import numpy as np
import pytest
from pydantic import ValidationError

from src.core.errors import DomainError
from src.core.laws import (
    b_positive, cdf_a, log_mgf_derivs, mgf_a, sample_a, sample_b, sample_tilted_a, support_extremes,
    tilt_a,
)
from src.models.law import (
    ConstB, ExponentialB, InnovationLaw, LogNormalA, TwoPointA, TwoPointB, UniformA, UniformB,
    parse_law,
)
from tests.conftest import ALL_A_LAWS, SQRT2


def _rng(seed=12345):
    return np.random.default_rng(seed)


class TestSampling:
    def test_degenerate_twopoint(self):
        law = TwoPointA(a1=0.5, p1=1.0, a2=2.0)
        draws = sample_a(law, _rng(), 1000)
        assert np.all(draws == 0.5)

    def test_uniform_support(self):
        law = UniformA(lo=1.0, hi=1.001)
        draws = sample_a(law, _rng(), 10_000)
        assert draws.min() >= 1.0 and draws.max() <= 1.001

    def test_lognormal_log_mean(self):
        draws = sample_a(LogNormalA(mu=0.0, sigma=1.0), _rng(), 1_000_000)
        assert abs(np.mean(np.log(draws))) < 4e-3

    def test_scalar_draw(self):
        assert isinstance(sample_a(LogNormalA(mu=0.0, sigma=1.0), _rng()), float)
        assert sample_b(ConstB(value=1.0), _rng()) == 1.0

    def test_b_samplers(self):
        n = 1_000_000
        assert np.all(sample_b(ConstB(value=1.0), _rng(), 10) == 1.0)
        exp_draws = sample_b(ExponentialB(rate=2.0), _rng(1), n)
        assert abs(exp_draws.mean() - 0.5) < 4 * 0.5 / math.sqrt(n)
        uni_draws = sample_b(UniformB(lo=-1.0, hi=1.0), _rng(2), n)
        assert abs(uni_draws.mean()) < 4 / (math.sqrt(3) * 1e3)

    @pytest.mark.parametrize("law", ALL_A_LAWS)
    @pytest.mark.parametrize("s", [0.0, 0.5, 1.0])
    def test_empirical_moments(self, law, s):
        draws = sample_a(law, _rng(7), 1_000_000) ** s
        stderr = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean() - mgf_a(law, s)) <= 5 * stderr + 1e-12


class TestMoments:
    def test_examples(self):
        assert mgf_a(LogNormalA(mu=-1.0, sigma=SQRT2), 2.0) == pytest.approx(math.e ** 2, rel=1e-12)
        assert mgf_a(UniformA(lo=0.2, hi=1.4), 1.0) == pytest.approx(0.8, rel=1e-12)
        assert mgf_a(TwoPointA(a1=0.5, p1=0.75, a2=2.0), 1.0) == pytest.approx(0.875, rel=1e-12)

    def test_lognormal_derivs(self):
        lam, d1, d2 = log_mgf_derivs(LogNormalA(mu=-1.0, sigma=SQRT2), 1.0)
        assert lam == pytest.approx(0.0, abs=1e-12)
        assert d1 == pytest.approx(1.0, rel=1e-12)
        assert d2 == pytest.approx(2.0, rel=1e-12)

    @pytest.mark.parametrize("law", ALL_A_LAWS)
    def test_zero_at_origin(self, law):
        assert abs(log_mgf_derivs(law, 0.0)[0]) < 1e-14

    def test_twopoint_mean_log(self):
        d1 = log_mgf_derivs(TwoPointA(a1=0.5, p1=0.75, a2=2.0), 0.0)[1]
        assert d1 == pytest.approx(-0.5 * math.log(2.0), rel=1e-12)

    @pytest.mark.parametrize("law", ALL_A_LAWS)
    def test_matches_finite_differences(self, law):
        h = 1e-5
        for s in np.linspace(0.1, 5.0, 25):
            lam_p, d1_p, _ = log_mgf_derivs(law, s + h)
            lam_m, d1_m, _ = log_mgf_derivs(law, s - h)
            _, d1, d2 = log_mgf_derivs(law, s)
            assert abs((lam_p - lam_m) / (2 * h) - d1) < 1e-6
            assert abs((d1_p - d1_m) / (2 * h) - d2) < 1e-6

    @pytest.mark.parametrize("law", ALL_A_LAWS)
    def test_strict_convexity(self, law):
        for s in np.linspace(0.0, 5.0, 11):
            assert log_mgf_derivs(law, s)[2] > 0

    def test_uniform_matches_mgf(self, uniform_a):
        for s in (0.3, 1.0, 4.0):
            assert math.exp(log_mgf_derivs(uniform_a, s)[0]) == pytest.approx(mgf_a(uniform_a, s), rel=1e-12)

    def test_negative_s_rejected(self, lognormal_a):
        with pytest.raises(DomainError):
            mgf_a(lognormal_a, -0.1)
        with pytest.raises(DomainError):
            log_mgf_derivs(lognormal_a, -1.0)
        with pytest.raises(DomainError):
            tilt_a(lognormal_a, -1.0)


class TestTilt:
    def test_lognormal_closed_form(self, lognormal_a):
        tilted = tilt_a(lognormal_a, 1.0)
        assert tilted.closed_form == LogNormalA(mu=1.0, sigma=SQRT2)
        assert tilted.log_normalizer == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("law", ALL_A_LAWS)
    def test_identity_tilt(self, law):
        tilted = tilt_a(law, 0.0)
        assert tilted.closed_form == law
        assert tilted.log_normalizer == 0.0

    def test_twopoint_reweights(self, twopoint_a):
        tilted = tilt_a(twopoint_a, 1.0)
        assert tilted.closed_form.p1 == pytest.approx(0.375 / 0.875, rel=1e-12)
        assert math.exp(tilted.log_normalizer) == pytest.approx(0.875, rel=1e-12)

    @pytest.mark.parametrize("law", ALL_A_LAWS)
    @pytest.mark.parametrize("s", [0.5, 1.0, 2.0])
    def test_normalizer_matches_mgf(self, law, s):
        assert math.exp(tilt_a(law, s).log_normalizer) == pytest.approx(mgf_a(law, s), rel=1e-12)

    @pytest.mark.parametrize("law", ALL_A_LAWS)
    @pytest.mark.parametrize("s", [0.5, 2.0])
    def test_reweighting_consistency(self, law, s):
        n = 200_000
        tilted = tilt_a(law, s)
        lam = mgf_a(law, s)
        for level in (0.7, 1.0, 1.3):
            a_t = sample_tilted_a(tilted, _rng(3), n)
            x_t = (a_t > level) * lam / a_t ** s
            x_b = (sample_a(law, _rng(4), n) > level).astype(float)
            combined = math.sqrt(x_t.var(ddof=1) / n + x_b.var(ddof=1) / n)
            assert abs(x_t.mean() - x_b.mean()) <= 5 * combined + 1e-12

    def test_uniform_tilt_stays_in_support(self, uniform_a):
        draws = sample_tilted_a(tilt_a(uniform_a, 3.0), _rng(), 10_000)
        assert draws.min() >= 0.2 and draws.max() <= 1.4


class TestDistributionFunction:
    @pytest.mark.parametrize("law", ALL_A_LAWS)
    def test_limits(self, law):
        values = cdf_a(law, np.array([0.0, math.inf]))
        assert values[0] == 0.0
        assert values[1] == 1.0

    def test_lognormal_median(self, lognormal_a):
        assert float(cdf_a(lognormal_a, math.exp(lognormal_a.mu))) == pytest.approx(0.5, abs=1e-15)

    def test_twopoint_atoms_are_included(self, twopoint_a):
        below, at, between, top = cdf_a(twopoint_a, np.array([0.4999, 0.5, 1.0, 2.0]))
        assert below == 0.0
        assert at == pytest.approx(twopoint_a.p1)
        assert between == pytest.approx(twopoint_a.p1)
        assert top == pytest.approx(1.0)

    @pytest.mark.parametrize("law", ALL_A_LAWS)
    @pytest.mark.parametrize("x", [0.3, 0.8, 1.5])
    def test_matches_empirical(self, law, x):
        n = 1_000_000
        draws = sample_a(law, _rng(11), n)
        p = float(cdf_a(law, x))
        assert abs(np.mean(draws <= x) - p) <= 5 * math.sqrt(p * (1 - p) / n) + 1e-12


class TestSupport:
    def test_uniform(self, uniform_a):
        ext = support_extremes(InnovationLaw(a=uniform_a, b=ConstB(value=1.0)))
        assert (ext.a_lo, ext.a_hi, ext.has_a_below_1, ext.has_a_above_1) == (0.2, 1.4, True, True)

    def test_twopoint(self, twopoint_law):
        ext = support_extremes(twopoint_law)
        assert (ext.a_lo, ext.a_hi, ext.has_a_below_1, ext.has_a_above_1) == (0.5, 2.0, True, True)
        assert not ext.a_continuous

    def test_lognormal_unbounded(self, lognormal_law):
        ext = support_extremes(lognormal_law)
        assert ext.a_lo == 0.0 and math.isinf(ext.a_hi)
        assert ext.has_a_below_1 and ext.has_a_above_1

    def test_b_positive(self, lognormal_a):
        assert b_positive(InnovationLaw(a=lognormal_a, b=ExponentialB(rate=1.0)))
        assert b_positive(InnovationLaw(a=lognormal_a, b=UniformB(lo=1.0, hi=2.0)))
        assert not b_positive(InnovationLaw(a=lognormal_a, b=UniformB(lo=-1.0, hi=1.0)))
        assert not b_positive(InnovationLaw(a=lognormal_a, b=TwoPointB(b1=0.0, p1=0.5, b2=1.0)))


class TestSchema:
    def test_parse_json(self):
        law = parse_law(
            '{"A":{"type":"lognormal","mu":-1.0,"sigma":1.4142135623730951},'
            '"B":{"type":"const","value":1.0}}'
        )
        assert isinstance(law.a, LogNormalA) and isinstance(law.b, ConstB)
        assert parse_law(law.to_json_dict()) == law

    def test_unknown_key_rejected(self):
        with pytest.raises(ValidationError):
            parse_law({"A": {"type": "lognormal", "mu": 0.0, "sigma": 1.0, "extra": 1},
                       "B": {"type": "const", "value": 1.0}})
        with pytest.raises(ValidationError):
            parse_law({"A": {"type": "lognormal", "mu": 0.0, "sigma": 1.0},
                       "B": {"type": "const", "value": 1.0}, "C": {}})

    def test_invalid_parameters(self):
        with pytest.raises(ValidationError):
            UniformA(lo=1.4, hi=0.2)
        with pytest.raises(ValidationError):
            TwoPointA(a1=2.0, p1=0.5, a2=0.5)
        with pytest.raises(ValidationError):
            LogNormalA(mu=0.0, sigma=0.0)
        with pytest.raises(ValidationError):
            parse_law({"A": {"type": "gamma", "k": 1.0}, "B": {"type": "const", "value": 1.0}})

    def test_lattice_flag(self, twopoint_law, lognormal_law):
        assert twopoint_law.is_lattice
        assert not lognormal_law.is_lattice
