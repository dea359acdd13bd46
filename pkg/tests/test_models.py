import numpy as np
import pytest

from netdesign.models import (
    NefAbstract,
    NormalParams,
    OutcomeVector,
    PoissonGammaParams,
    PriorSpec,
    draw_params_from_prior,
    draw_prior_batch,
    draw_y0_normal,
    draw_y0_poisson_gamma,
    marginal_covariance,
    nef_abstract_normal,
    nef_abstract_poisson_gamma,
    sample_outcomes_normal,
)
from netdesign.network import from_edge_list, gen_erdos_renyi


def within_se(sample, target, k=4.0):
    se = sample.std(ddof=1) / np.sqrt(len(sample))
    return abs(sample.mean() - target) <= k * se


class TestParameters:
    @pytest.mark.parametrize("kw", [dict(mu=0, sigma2=0, gamma2=1), dict(mu=0, sigma2=1, gamma2=-1)])
    def test_normal_rejects(self, kw):
        with pytest.raises(ValueError):
            NormalParams(**kw)

    @pytest.mark.parametrize("kw", [dict(r=0, lam=1), dict(r=1, lam=-2)])
    def test_pg_rejects(self, kw):
        with pytest.raises(ValueError):
            PoissonGammaParams(**kw)

    @pytest.mark.parametrize("field", ["r_sigma", "r_gamma"])
    @pytest.mark.parametrize("value", [1.0, 0.5])
    def test_prior_needs_finite_means(self, field, value):
        with pytest.raises(ValueError, match="integrable"):
            PriorSpec(**{field: value})

    def test_prior_moments(self):
        p = PriorSpec(mu0=1.0, sigma0=0.5, r_gamma=3.0, lambda_gamma=1.0)
        assert p.mean_mu2 == pytest.approx(1.25)
        assert p.mean_gamma2 == pytest.approx(0.5)
        assert p.mean_sigma2 == pytest.approx(1.0)


class TestAbstractMapping:
    def test_normal(self, path3):
        nef = nef_abstract_normal(NormalParams(2.0, 3.0, 0.5), path3)
        assert (nef.mu, nef.phi_x) == (2.0, 3.0)
        assert nef.expected_lambda.tolist() == [0.5, 0.5, 0.5]

    def test_poisson_gamma(self, path3):
        nef = nef_abstract_poisson_gamma(PoissonGammaParams(r=2.0, lam=3.0), path3)
        assert nef.mu == 6.0
        assert nef.phi_x == 18.0
        assert nef.expected_lambda.tolist() == [12.0, 18.0, 12.0]

    def test_covariance_edgeless(self):
        net = from_edge_list(4, [])
        cov = marginal_covariance(nef_abstract_normal(NormalParams(0, 2.0, 0.5), net), net)
        assert np.allclose(cov, 2.5 * np.eye(4))

    def test_covariance_path(self, path3):
        cov = marginal_covariance(nef_abstract_normal(NormalParams(0, 1.0, 1.0), path3), path3)
        assert cov[0, 2] == 1.0
        assert np.allclose(np.diag(cov), [3, 4, 3])

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            NefAbstract(0.0, -1.0, np.ones(3))


class TestSampling:
    def test_outcome_vector(self):
        ov = OutcomeVector(np.array([1.0, 2.0, 3.0]), tau=0.5)
        assert ov.observed([1, 0, 1]).tolist() == [1.5, 2.0, 3.5]

    def test_single_draw_shape(self, path3, rng):
        ov = sample_outcomes_normal(NormalParams(0, 1, 1), path3, rng, tau=2.0)
        assert ov.y0.shape == (3,)
        assert np.allclose(ov.y1 - ov.y0, 2.0)

    def test_normal_moments(self, rng):
        net = gen_erdos_renyi(8, 0.4, 1)
        params = NormalParams(mu=0.7, sigma2=1.3, gamma2=0.4)
        y = draw_y0_normal(params, net, rng, 100_000)
        assert np.allclose(y.mean(axis=0), 0.7 * net.sizes, atol=0.05)
        expected = marginal_covariance(nef_abstract_normal(params, net), net)
        assert np.allclose(np.cov(y, rowvar=False), expected, rtol=0.05, atol=0.05)

    def test_poisson_gamma_moments(self, path3, rng):
        params = PoissonGammaParams(r=2.0, lam=0.5)
        y = draw_y0_poisson_gamma(params, path3, rng, 200_000)
        nef = nef_abstract_poisson_gamma(params, path3)
        assert np.all(y == np.round(y)) and y.min() >= 0
        assert np.allclose(y.mean(axis=0), nef.mu * path3.sizes, rtol=0.01)
        assert np.allclose(np.cov(y, rowvar=False), marginal_covariance(nef, path3), rtol=0.03, atol=0.02)

    def test_seeded(self, path3):
        p = NormalParams(0, 1, 1)
        a = draw_y0_normal(p, path3, np.random.default_rng(5), 4)
        b = draw_y0_normal(p, path3, np.random.default_rng(5), 4)
        assert np.array_equal(a, b)


class TestPriorDraws:
    def test_batch_moments(self, rng):
        prior = PriorSpec(mu0=-0.5, sigma0=0.8, r_gamma=5.0, lambda_gamma=2.0, r_sigma=6.0, lambda_sigma=3.0)
        mu, sigma2, gamma2 = draw_prior_batch(prior, rng, 200_000)
        assert within_se(mu**2, prior.mean_mu2)
        assert within_se(sigma2, prior.mean_sigma2)
        assert within_se(gamma2, prior.mean_gamma2)
        assert sigma2.min() > 0 and gamma2.min() > 0

    def test_single_matches_batch(self):
        prior = PriorSpec()
        one = draw_params_from_prior(prior, np.random.default_rng(3))
        mu, s2, g2 = draw_prior_batch(prior, np.random.default_rng(3), 1)
        assert (one.mu, one.sigma2, one.gamma2) == (mu[0], s2[0], g2[0])
