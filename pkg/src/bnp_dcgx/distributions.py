"""Samplers and log densities the MCMC needs beyond numpy's primitives."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import (NegativeChi, NonPositiveSigma, NotPD,
                     StabilityRejectionExhausted)
from .stability import is_stable

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class GigHalfParams:
    chi: float

    def __post_init__(self):
        if not self.chi >= 0:
            raise NegativeChi(f"chi must be >= 0, got {self.chi}")


def sample_gig_half(chi, rng: np.random.Generator, size=None):
    """Draw tau with density proportional to ``tau**-0.5 * exp(-(2*tau + chi/tau)/2)``.

    The reciprocal ``1/tau`` is inverse Gaussian with mean ``sqrt(2/chi)`` and
    shape 2, drawn with the Michael-Schucany-Haas transform. ``chi == 0``
    reduces to Gamma(1/2, rate 1). Vectorized over ``chi``.
    """
    chi = np.asarray(chi, dtype=float)
    if size is not None:
        chi = np.broadcast_to(chi, size)
    if np.any(chi < 0) or np.any(np.isnan(chi)):
        raise NegativeChi("chi must be non-negative")
    shape = 2.0
    nu = rng.standard_normal(chi.shape) ** 2
    u = rng.random(chi.shape)
    # work with r = 1/mu so tiny chi cannot overflow; r == 0 is the chi == 0 limit
    r = np.sqrt(0.5 * chi)
    # smaller root of the MSH quadratic divided by mu**2, without cancellation
    x1 = 4.0 * shape * nu / (nu + np.sqrt(nu * nu + 4.0 * shape * nu * r)) ** 2
    tau = np.where(u * (1.0 + x1 * r) <= 1.0, 1.0 / x1, x1 * r * r)
    return tau if tau.ndim else float(tau)


def mvt_logpdf(x, df, loc, scale):
    """Multivariate Student-t log density, broadcasting over leading axes.

    ``x`` and ``loc`` have trailing dimension q and ``scale`` trailing shape (q, q).
    """
    x = np.asarray(x, dtype=float)
    loc = np.asarray(loc, dtype=float)
    scale = np.asarray(scale, dtype=float)
    df = np.asarray(df, dtype=float)
    q = scale.shape[-1]
    try:
        chol = np.linalg.cholesky(scale)
    except np.linalg.LinAlgError as exc:
        raise NotPD("t scale matrix is not positive definite") from exc
    if np.any(df <= 0):
        raise ValueError("df must be positive")
    dev = x - loc
    if q == 1:
        maha = dev[..., 0] ** 2 / scale[..., 0, 0]
    else:
        sol = np.linalg.solve(scale, dev[..., None])[..., 0]
        maha = np.einsum("...i,...i->...", dev, sol)
    logdet = 2.0 * np.log(np.diagonal(chol, axis1=-2, axis2=-1)).sum(-1)
    return (gammaln(0.5 * (df + q)) - gammaln(0.5 * df) - 0.5 * q * np.log(df * np.pi)
            - 0.5 * logdet - 0.5 * (df + q) * np.log1p(maha / df))


def normal_logpdf(x, mean, var):
    return -0.5 * (LOG_2PI + np.log(var) + (x - mean) ** 2 / var)


def laplace_loglik_vector(r, sigma):
    """Log density of independent Laplace noise with scales ``sqrt(sigma/2)``.

    Sums over the last axis of ``r``.
    """
    r = np.asarray(r, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0):
        raise NonPositiveSigma("sigma must be positive")
    return np.sum(-0.5 * np.log(2.0 * sigma) - np.sqrt(2.0 / sigma) * np.abs(r), axis=-1)


def _offdiag_mask(p):
    return ~np.eye(p, dtype=bool)


def sample_stable_spike_slab(gamma, eta, nu0, eps_stab, max_tries=1000, rng=None):
    """Draw B from the spike-and-slab Gaussian given (gamma, eta), truncated to stable matrices.

    Off-diagonal entries are N(0, eta) where gamma is 1 and N(0, nu0*eta)
    otherwise; the diagonal is zero. Draws are redrawn until stable.
    """
    gamma = np.asarray(gamma)
    p = gamma.shape[0]
    sd = np.sqrt(eta * np.where(gamma == 1, 1.0, nu0)) * _offdiag_mask(p)
    for _ in range(max_tries):
        B = rng.standard_normal((p, p)) * sd
        if is_stable(B, eps_stab):
            return B
    raise StabilityRejectionExhausted(
        f"no stable draw in {max_tries} tries (eta={eta:.3g})")


@dataclass
class PriorDraws:
    """A batch of joint draws from the cascade prior, one per leading index."""
    B: np.ndarray
    gamma: np.ndarray
    eta: np.ndarray
    phi: np.ndarray

    def __len__(self):
        return self.B.shape[0]


def sample_cascade_prior(n_draws: int, p: int, hp, rng: np.random.Generator,
                         max_rounds: int = 10_000) -> PriorDraws:
    """Joint draws of (B, gamma, eta, phi) from the cascade prior.

    The normalizers of the cascade prior cancel, so the joint density is the
    untruncated product Beta x Bernoulli x inverse-gamma x spike-and-slab
    restricted to stable B. Candidates are therefore drawn from the product
    measure and kept when B is stable. Norm bounds on the spectral radius
    settle most candidates; only the ambiguous ones reach the eigensolver.
    """
    mask = _offdiag_mask(p)
    thresh = 1.0 - hp.eps_stab
    # beyond this slab variance, stability needs rho(W) < 1e-3 * sqrt(nu0),
    # a negligible event for a Gaussian matrix; such candidates are rejected
    # without drawing B
    eta_max = 1e6 / hp.nu0 if p >= 3 else np.inf
    kept_B, kept_g, kept_e, kept_f = [], [], [], []
    have = 0
    for _ in range(max_rounds):
        if have >= n_draws:
            break
        batch = max(64, 8 * (n_draws - have))
        with np.errstate(divide="ignore", over="ignore"):
            eta = hp.b_eta / rng.gamma(hp.a_eta, 1.0, size=batch)
        phi = rng.beta(hp.a_phi, hp.b_phi, size=batch)
        live = np.isfinite(eta) & (eta <= eta_max)
        eta, phi = eta[live], phi[live]
        batch = eta.size
        if batch == 0:
            continue
        gamma = (rng.random((batch, p, p)) < phi[:, None, None]) & mask
        sd = np.sqrt(np.where(gamma, 1.0, hp.nu0)) * mask
        with np.errstate(over="ignore", invalid="ignore"):
            B = rng.standard_normal((batch, p, p)) * sd * np.sqrt(eta)[:, None, None]
        ok = np.isfinite(B).all(axis=(1, 2))
        B = np.where(ok[:, None, None], B, 0.0)
        absB = np.abs(B)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            B2 = B @ B
            B3 = B2 @ B
            B4 = B2 @ B2
            # rho <= ||B^k||^(1/k) and rho^k >= |tr B^k| / p
            upper = np.minimum.reduce([
                absB.sum(1).max(1), absB.sum(2).max(1), np.sqrt((B * B).sum((1, 2))),
                np.sqrt((B2 * B2).sum((1, 2))) ** 0.5, np.sqrt((B4 * B4).sum((1, 2))) ** 0.25])
            _, logabsdet = np.linalg.slogdet(B)
            lower = np.maximum.reduce([
                np.exp(logabsdet / p),
                np.sqrt(np.abs(np.trace(B2, axis1=1, axis2=2)) / p),
                np.cbrt(np.abs(np.trace(B3, axis1=1, axis2=2)) / p),
                (np.abs(np.trace(B4, axis1=1, axis2=2)) / p) ** 0.25])
        upper = np.where(np.isnan(upper), np.inf, upper)
        lower = np.where(np.isnan(lower), 0.0, lower)
        stable = ok & (upper <= thresh - 1e-9)
        unsure = ok & ~stable & ~(lower > thresh)
        if np.any(unsure):
            ev = np.linalg.eigvals(B[unsure])
            stable[np.flatnonzero(unsure)] = np.abs(ev).max(1) <= thresh
        for i in np.flatnonzero(stable):
            if have >= n_draws:
                break
            kept_B.append(B[i])
            kept_g.append(gamma[i].astype(np.int8))
            kept_e.append(eta[i])
            kept_f.append(phi[i])
            have += 1
    else:
        raise StabilityRejectionExhausted("cascade prior rejection did not finish")
    return PriorDraws(np.array(kept_B).reshape(n_draws, p, p),
                      np.array(kept_g, dtype=np.int8).reshape(n_draws, p, p),
                      np.array(kept_e, dtype=float), np.array(kept_f, dtype=float))
