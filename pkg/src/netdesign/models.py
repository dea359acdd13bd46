"""Network-correlated outcome models: Normal-Normal and Poisson-Gamma.

Both instances share the same latent construction. Each node carries an iid
latent ``X_j``; the control outcome of node ``i`` is drawn around the sum of
the latents over its closed neighborhood, and the treated outcome is shifted
by a constant effect ``tau``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class NormalParams:
    mu: float
    sigma2: float
    gamma2: float

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        if not self.gamma2 > 0:
            raise ValueError(f"gamma2 must be positive, got {self.gamma2}")


@dataclass(frozen=True)
class PoissonGammaParams:
    r: float
    lam: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError(f"Gamma shape r must be positive, got {self.r}")
        if not self.lam > 0:
            raise ValueError(f"Gamma scale lam must be positive, got {self.lam}")


@dataclass(frozen=True)
class NefAbstract:
    """Model reduced to what the risk needs: latent mean, latent variance
    ``phi_x`` and the per-node expected conditional variance."""

    mu: float
    phi_x: float
    expected_lambda: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.phi_x < 0:
            raise ValueError("phi_x must be non-negative")
        if np.any(np.asarray(self.expected_lambda) < 0):
            raise ValueError("expected_lambda must be non-negative")


@dataclass(frozen=True)
class PriorSpec:
    """Prior over Normal-Normal parameters.

    ``mu ~ Normal(mu0, sd=sigma0)``, ``sigma2 ~ InvGamma(r_sigma, scale=lambda_sigma)``,
    ``gamma2 ~ InvGamma(r_gamma, scale=lambda_gamma)``. Inverse-Gamma means are
    ``scale / (shape - 1)``, so both shapes must exceed 1 for the risk to be
    integrable. Defaults are the simulation-study values.
    """

    mu0: float = 1.0
    sigma0: float = 0.5
    r_gamma: float = 3.0
    lambda_gamma: float = 1.0
    r_sigma: float = 2.0
    lambda_sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise ValueError(f"sigma0 must be positive, got {self.sigma0}")
        if not self.r_sigma > 1:
            raise ValueError(
                f"r_sigma must exceed 1 for an integrable risk (got {self.r_sigma})"
            )
        if not self.r_gamma > 1:
            raise ValueError(
                f"r_gamma must exceed 1 for an integrable risk (got {self.r_gamma})"
            )
        if not self.lambda_sigma > 0 or not self.lambda_gamma > 0:
            raise ValueError("Inverse-Gamma scales must be positive")

    @property
    def mean_mu2(self):
        return self.sigma0**2 + self.mu0**2

    @property
    def mean_sigma2(self):
        return self.lambda_sigma / (self.r_sigma - 1)

    @property
    def mean_gamma2(self):
        return self.lambda_gamma / (self.r_gamma - 1)

    def to_dict(self):
        return {
            "mu0": self.mu0,
            "sigma0": self.sigma0,
            "r_gamma": self.r_gamma,
            "lambda_gamma": self.lambda_gamma,
            "r_sigma": self.r_sigma,
            "lambda_sigma": self.lambda_sigma,
        }


@dataclass(frozen=True)
class OutcomeVector:
    y0: np.ndarray = field(repr=False)
    tau: float = 0.0

    @property
    def y1(self):
        return self.y0 + self.tau

    def observed(self, z):
        z = np.asarray(z)
        return np.where(z == 1, self.y1, self.y0)


def nef_abstract_normal(params, net):
    return NefAbstract(
        mu=float(params.mu),
        phi_x=float(params.sigma2),
        expected_lambda=np.full(net.n, float(params.gamma2)),
    )


def nef_abstract_poisson_gamma(params, net):
    mu = params.r * params.lam
    return NefAbstract(
        mu=float(mu),
        phi_x=float(mu * params.lam),
        expected_lambda=net.sizes * float(mu),
    )


def marginal_covariance(abs_model, net):
    """Marginal covariance of ``Y(0)``: ``A'A * phi_x + diag(E[Lambda])``."""
    cov = net.gram * abs_model.phi_x
    cov = cov + np.diag(np.asarray(abs_model.expected_lambda, dtype=float))
    return cov


# ---------------------------------------------------------------- sampling


def draw_y0_normal(params, net, rng, size):
    """``size`` independent control-outcome vectors, shape ``(size, n)``."""
    x = rng.normal(params.mu, np.sqrt(params.sigma2), size=(size, net.n))
    mean = x @ net.augmented
    return mean + rng.normal(0.0, np.sqrt(params.gamma2), size=mean.shape)


def draw_y0_poisson_gamma(params, net, rng, size):
    x = params.lam * rng.gamma(params.r, 1.0, size=(size, net.n))
    return rng.poisson(x @ net.augmented).astype(float)


def sample_outcomes_normal(params, net, rng, tau=0.0):
    return OutcomeVector(draw_y0_normal(params, net, rng, 1)[0], float(tau))


def sample_outcomes_poisson_gamma(params, net, rng, tau=0.0):
    return OutcomeVector(draw_y0_poisson_gamma(params, net, rng, 1)[0], float(tau))


# ---------------------------------------------------------------- prior


def draw_params_from_prior(prior, rng):
    gamma2 = prior.lambda_gamma / rng.gamma(prior.r_gamma)
    mu = rng.normal(prior.mu0, prior.sigma0)
    sigma2 = prior.lambda_sigma / rng.gamma(prior.r_sigma)
    return NormalParams(mu=float(mu), sigma2=float(sigma2), gamma2=float(gamma2))


def draw_prior_batch(prior, rng, size):
    """Vectorized prior draws; returns arrays ``(mu, sigma2, gamma2)``."""
    gamma2 = prior.lambda_gamma / rng.gamma(prior.r_gamma, size=size)
    mu = rng.normal(prior.mu0, prior.sigma0, size=size)
    sigma2 = prior.lambda_sigma / rng.gamma(prior.r_sigma, size=size)
    return mu, sigma2, gamma2
