"""Mean squared error of the difference-in-means estimator under the
network-correlated outcome models, and its integral over a prior."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .models import (
    draw_prior_batch,
    marginal_covariance,
    nef_abstract_normal,
    nef_abstract_poisson_gamma,
)


class DegenerateAssignmentError(ValueError):
    """Raised when every unit lands in the same arm."""


@dataclass(frozen=True)
class Assignment:
    z: np.ndarray = field(repr=False)

    def __post_init__(self):
        z = np.asarray(self.z)
        if z.ndim != 1:
            raise ValueError("assignment must be a 1-d vector")
        if not np.all((z == 0) | (z == 1)):
            raise ValueError("assignment entries must be 0 or 1")
        z = z.astype(np.int8)
        z.setflags(write=False)
        object.__setattr__(self, "z", z)
        n1 = int(z.sum())
        if n1 == 0 or n1 == len(z):
            raise DegenerateAssignmentError(
                f"assignment puts all {len(z)} units in one arm (N1={n1})"
            )

    @property
    def n(self):
        return len(self.z)

    @property
    def n1(self):
        return int(self.z.sum())

    @property
    def n0(self):
        return self.n - self.n1

    def key(self):
        """Tuple used for the smallest-encoding tie-break (z[0] most significant)."""
        return tuple(self.z.tolist())

    def complement(self):
        return Assignment(1 - self.z)

    def tolist(self):
        return self.z.tolist()


def _as_assignment(a):
    return a if isinstance(a, Assignment) else Assignment(np.asarray(a))


def contrast_weights(a):
    a = _as_assignment(a)
    z = a.z.astype(float)
    return z / a.n1 - (1.0 - z) / a.n0


def delta_neighborhood(a, sizes):
    a = _as_assignment(a)
    sizes = np.asarray(sizes, dtype=float)
    treated = a.z == 1
    return sizes[treated].sum() / a.n1 - sizes[~treated].sum() / a.n0


def variance_of_contrast(w, cov):
    w = np.asarray(w, dtype=float)
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (len(w), len(w)):
        raise ValueError(f"covariance shape {cov.shape} does not match {len(w)} weights")
    return float(w @ cov @ w)


def _check_dims(net, a):
    if a.n != net.n:
        raise ValueError(f"assignment has {a.n} entries but the network has {net.n} nodes")


def mse_general(abs_model, net, a):
    a = _as_assignment(a)
    _check_dims(net, a)
    w = contrast_weights(a)
    delta = delta_neighborhood(a, net.sizes)
    quad = w @ (net.gram * abs_model.phi_x) @ w + np.sum(abs_model.expected_lambda * w * w)
    return float(abs_model.mu**2 * delta**2 + quad)


def mse_normal(params, net, a):
    a = _as_assignment(a)
    _check_dims(net, a)
    w = contrast_weights(a)
    delta = delta_neighborhood(a, net.sizes)
    inner = (params.gamma2 / params.sigma2) * (w @ w) + w @ net.gram @ w
    return float(params.mu**2 * delta**2 + params.sigma2 * inner)


def mse_poisson_gamma(params, net, a):
    # The closed form with the r*lam bias prefactor; see mse_general.
    return mse_general(nef_abstract_poisson_gamma(params, net), net, a)


@dataclass(frozen=True)
class MseDecomposition:
    bias_sq: float
    group_size_var: float
    net_var_treated: float
    net_var_control: float
    net_var_cross: float

    @property
    def total(self):
        return (
            self.bias_sq
            + self.group_size_var
            + self.net_var_treated
            + self.net_var_control
            - self.net_var_cross
        )

    def to_dict(self):
        return {
            "bias_sq": self.bias_sq,
            "group_size_var": self.group_size_var,
            "net_var_treated": self.net_var_treated,
            "net_var_control": self.net_var_control,
            "net_var_cross": self.net_var_cross,
            "total": self.total,
        }


def mse_decomposition_normal(params, net, a):
    """Split the Normal-model MSE into bias, group-size and network terms.

    The network variance ``sigma2 * w'A'Aw`` is separated into the shared
    neighbor counts within the treated group, within the control group, and
    across groups (the latter enters with a minus sign).
    """
    a = _as_assignment(a)
    _check_dims(net, a)
    t = a.z == 1
    g = net.gram
    s2 = params.sigma2
    delta = delta_neighborhood(a, net.sizes)
    return MseDecomposition(
        bias_sq=float(params.mu**2 * delta**2),
        group_size_var=float(params.gamma2 * (1.0 / a.n1 + 1.0 / a.n0)),
        net_var_treated=float(s2 / a.n1**2 * g[np.ix_(t, t)].sum()),
        net_var_control=float(s2 / a.n0**2 * g[np.ix_(~t, ~t)].sum()),
        net_var_cross=float(2.0 * s2 / (a.n1 * a.n0) * g[np.ix_(t, ~t)].sum()),
    )


# ---------------------------------------------------------------- integrated MSE


@dataclass(frozen=True)
class ImseEstimate:
    value: float
    n_draws: int
    std_error: float


def risk_components(net, a):
    """``(delta^2, w'A'Aw, w'w)``; every Normal-model risk is linear in these."""
    a = _as_assignment(a)
    _check_dims(net, a)
    w = contrast_weights(a)
    delta = delta_neighborhood(a, net.sizes)
    return float(delta**2), float(w @ net.gram @ w), float(w @ w)


def imse_mc(prior, net, a, n_draws, rng):
    """Monte Carlo integrated MSE under ``prior`` (Normal-Normal model).

    Each draw's MSE is the Normal-model closed form at that parameter draw.
    """
    n_draws = int(n_draws)
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    b, v, g = risk_components(net, a)
    mu, sigma2, gamma2 = draw_prior_batch(prior, rng, n_draws)
    per_draw = mu**2 * b + sigma2 * v + gamma2 * g
    value = float(per_draw.mean())
    se = float(per_draw.std(ddof=1) / math.sqrt(n_draws)) if n_draws > 1 else 0.0
    return ImseEstimate(value=value, n_draws=n_draws, std_error=se)


def imse_closed_form_normal(prior, net, a):
    # PriorSpec already rejects shapes <= 1.
    b, v, g = risk_components(net, a)
    return float(prior.mean_mu2 * b + prior.mean_sigma2 * v + prior.mean_gamma2 * g)


# ---------------------------------------------------------------- objectives


class RiskObjective:
    """Risk of the form ``bias_coef * delta^2 + net_coef * w'A'Aw + w'diag(d)w``.

    Every closed-form risk in this package has this shape, which lets the
    optimizer update it in O(1) per move from a handful of running sums. Call
    it with an :class:`Assignment` (or 0/1 vector) to evaluate from scratch.
    """

    def __init__(self, net, bias_coef, net_coef, unit_var):
        self.net = net
        self.bias_coef = float(bias_coef)
        self.net_coef = float(net_coef)
        d = np.broadcast_to(np.asarray(unit_var, dtype=float), (net.n,)).copy()
        if np.any(d < 0):
            raise ValueError("unit variances must be non-negative")
        self.unit_var = d
        self.gram = np.asarray(net.gram, dtype=float)
        self.row_sums = self.gram.sum(axis=1)
        self.gram_total = float(self.row_sums.sum())
        self.sizes = np.asarray(net.sizes, dtype=float)
        self.size_total = float(self.sizes.sum())
        self.var_total = float(d.sum())

    @classmethod
    def normal(cls, params, net):
        return cls(net, params.mu**2, params.sigma2, params.gamma2)

    @classmethod
    def poisson_gamma(cls, params, net):
        nef = nef_abstract_poisson_gamma(params, net)
        return cls(net, nef.mu**2, nef.phi_x, nef.expected_lambda)

    @classmethod
    def from_nef(cls, nef, net):
        return cls(net, nef.mu**2, nef.phi_x, nef.expected_lambda)

    @classmethod
    def imse_closed_form(cls, prior, net):
        return cls(net, prior.mean_mu2, prior.mean_sigma2, prior.mean_gamma2)

    @classmethod
    def imse_mc(cls, prior, net, n_draws, rng):
        """Monte Carlo iMSE with the parameter draws frozen, so repeated
        evaluations share common random numbers."""
        mu, sigma2, gamma2 = draw_prior_batch(prior, np.random.default_rng(rng), int(n_draws))
        return cls(net, np.mean(mu**2), np.mean(sigma2), np.mean(gamma2))

    def value_from_stats(self, n1, quad_t, row_t, size_t, var_t):
        """Risk from the treated-group sums ``z'Gz``, ``r'z``, ``N'z`` and ``d'z``."""
        n0 = self.net.n - n1
        delta = size_t / n1 - (self.size_total - size_t) / n0
        quad = (
            quad_t / (n1 * n1)
            + (self.gram_total - 2.0 * row_t + quad_t) / (n0 * n0)
            - 2.0 * (row_t - quad_t) / (n1 * n0)
        )
        diag = var_t / (n1 * n1) + (self.var_total - var_t) / (n0 * n0)
        return self.bias_coef * delta * delta + self.net_coef * quad + diag

    def stats(self, z):
        z = np.asarray(z, dtype=float)
        return (
            int(round(z.sum())),
            float(z @ self.gram @ z),
            float(self.row_sums @ z),
            float(self.sizes @ z),
            float(self.unit_var @ z),
        )

    def __call__(self, a):
        a = _as_assignment(a)
        _check_dims(self.net, a)
        return float(self.value_from_stats(*self.stats(a.z)))

    def batch(self, zs):
        """Evaluate many 0/1 rows at once; rows must be non-degenerate."""
        zs = np.asarray(zs, dtype=float)
        n1 = zs.sum(axis=1)
        quad_t = np.einsum("ij,ij->i", zs @ self.gram, zs)
        return self.value_from_stats(
            n1, quad_t, zs @ self.row_sums, zs @ self.sizes, zs @ self.unit_var
        )
