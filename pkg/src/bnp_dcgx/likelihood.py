"""Cluster likelihoods: the Laplace SEM marginal and the collapsed predictives.

Collapsed Y-predictive
----------------------
Write ``A = I - B`` and ``z = A y``. Given cluster membership the model is
``z = M + e`` with ``e ~ N(0, diag(sigma * tau_i))`` and ``M ~ N(0, lam I)``,
so every density below is evaluated coordinate-wise on ``z`` and multiplied
by the Jacobian ``|det A|``. Two variants are offered:

``"exact"``
    The conjugate predictive with each member's own noise scale.
``"printed"``
    The literal closed form in which every member shares the current unit's
    scale and the covariance lacks the ``Sigma`` factor.

Both reduce to the new-cluster case when the statistics are empty.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distributions import LOG_2PI, laplace_loglik_vector, mvt_logpdf
from .errors import SingularJacobian
from .stability import radius_and_logdet


@dataclass
class ClusterSuffStats:
    """Sufficient statistics of one cluster; ``G[j, k] = sum(y_k / tau_j)``."""
    p: int
    q: int
    member_ids: set = field(default_factory=set)
    count: int = 0
    sum_X: np.ndarray = None
    sum_XXt: np.ndarray = None
    sum_Y: np.ndarray = None
    sum_inv_tau: np.ndarray = None
    G: np.ndarray = None

    def __post_init__(self):
        if self.sum_X is None:
            self.sum_X = np.zeros(self.q)
            self.sum_XXt = np.zeros((self.q, self.q))
            self.sum_Y = np.zeros(self.p)
            self.sum_inv_tau = np.zeros(self.p)
            self.G = np.zeros((self.p, self.p))

    @classmethod
    def from_members(cls, Y, X, tau, ids) -> "ClusterSuffStats":
        ids = np.asarray(sorted(ids), dtype=int)
        Ys, Xs, inv = Y[ids], X[ids], 1.0 / tau[ids]
        return cls(p=Y.shape[1], q=X.shape[1], member_ids=set(ids.tolist()),
                   count=len(ids), sum_X=Xs.sum(0), sum_XXt=Xs.T @ Xs,
                   sum_Y=Ys.sum(0), sum_inv_tau=inv.sum(0), G=inv.T @ Ys)

    def add(self, i, x, y, tau_i):
        self._update(i, x, y, tau_i, +1)

    def remove(self, i, x, y, tau_i):
        self._update(i, x, y, tau_i, -1)

    def _update(self, i, x, y, tau_i, sign):
        if sign > 0:
            self.member_ids.add(i)
        else:
            self.member_ids.discard(i)
        inv = 1.0 / tau_i
        self.count += sign
        self.sum_X = self.sum_X + sign * x
        self.sum_XXt = self.sum_XXt + sign * np.outer(x, x)
        self.sum_Y = self.sum_Y + sign * y
        self.sum_inv_tau = self.sum_inv_tau + sign * inv
        self.G = self.G + sign * np.outer(inv, y)


def log_jacobian(B, strict_paper_det=False):
    """``log|det(I - B)|``; with ``strict_paper_det`` a negative determinant gives -inf."""
    _, logdet, sign = radius_and_logdet(B)
    if strict_paper_det and sign <= 0:
        return -np.inf
    return logdet


def sem_marginal_loglik(Y_cluster, B, M, sigma, strict_paper_det=False, logdet=None):
    """Laplace SEM log likelihood of a cluster's rows with the scale mixture integrated out."""
    Y_cluster = np.atleast_2d(np.asarray(Y_cluster, dtype=float))
    if logdet is None:
        logdet = log_jacobian(B, strict_paper_det)
    if not np.isfinite(logdet):
        if strict_paper_det and logdet == -np.inf:
            return -np.inf
        raise SingularJacobian("det(I - B) is zero")
    R = Y_cluster @ (np.eye(B.shape[0]) - B).T - M
    return Y_cluster.shape[0] * logdet + float(laplace_loglik_vector(R, sigma).sum())


def y_predictive_terms(z, s, count, sum_z_or_U, sum_inv_tau, sigma, lam, mode):
    """Per-coordinate predictive mean and variance of ``z`` (leading axes broadcast).

    For ``mode="exact"`` ``sum_z_or_U`` is ``sum_i' z_i'j / tau_i'j``; for
    ``"printed"`` it is ``A @ sum_Y``.
    """
    if mode == "exact":
        prec = 1.0 / lam + sum_inv_tau / sigma
        mean = (sum_z_or_U / sigma) / prec
        var = s + 1.0 / prec
    else:
        n_ = np.asarray(count, dtype=float)[..., None]
        mean = sum_z_or_U / (n_ + s / lam)
        var = 1.0 / (1.0 - 1.0 / (n_ + 1.0 + s / lam))
    return mean, var


def y_predictive_batch(y, tau_i, A, logdetA, sigma, count, sum_Y, sum_inv_tau, G,
                       lam, mode="exact"):
    """Collapsed Y-predictive log density of one unit under K clusters at once.

    Array arguments carry a leading cluster axis of length K; clusters with
    ``count == 0`` give the new-cluster density.
    """
    z = A @ y
    s = sigma * tau_i
    if mode == "exact":
        stat = np.einsum("kjl,kjl->kj", A, G)
    else:
        stat = np.einsum("kjl,kl->kj", A, sum_Y)
    mean, var = y_predictive_terms(z, s, count, stat, sum_inv_tau, sigma, lam, mode)
    return logdetA - 0.5 * np.sum(LOG_2PI + np.log(var) + (z - mean) ** 2 / var, axis=-1)


def y_collapsed_predictive_logpdf(y, B, sigma, tau_i, lam, stats=None, mode="exact",
                                  strict_paper_det=False):
    """Log density of ``y`` given the other members of a cluster, intercept integrated out.

    ``stats=None`` (or empty statistics) gives the new-cluster predictive.
    """
    p = len(y)
    A = np.eye(p) - np.asarray(B, dtype=float)
    logdet = log_jacobian(B, strict_paper_det)
    if stats is None:
        stats = ClusterSuffStats(p=p, q=1)
    return float(y_predictive_batch(
        np.asarray(y, float), np.asarray(tau_i, float), A[None], np.array([logdet]),
        np.asarray(sigma, float)[None], np.array([stats.count]), stats.sum_Y[None],
        stats.sum_inv_tau[None], stats.G[None], lam, mode)[0])


def x_predictive_params(count, sum_X, sum_XXt, omega):
    """Degrees of freedom, location and scale of the collapsed covariate t predictive."""
    count = np.asarray(count, dtype=float)
    sum_X = np.asarray(sum_X, dtype=float)
    q = sum_X.shape[-1]
    shrink = omega / (1.0 + count * omega)
    loc = shrink[..., None] * sum_X
    factor = (omega + 1.0 + count * omega) / ((count + 1.0) * (1.0 + count * omega))
    inner = (np.eye(q) - shrink[..., None, None] * sum_X[..., :, None] * sum_X[..., None, :]
             + sum_XXt)
    return count + 1.0, loc, factor[..., None, None] * inner


def x_collapsed_predictive_logpdf(x, count, sum_X, sum_XXt, omega):
    """Log density of covariate ``x`` given a cluster's (leave-one-out) statistics.

    Broadcasts over a leading cluster axis; ``count == 0`` is the new cluster.
    """
    df, loc, scale = x_predictive_params(count, sum_X, sum_XXt, omega)
    return mvt_logpdf(x, df, loc, scale)


def x_marginal_loglik(X_cluster, omega):
    """Log of the covariate similarity term for one cluster (chain rule over members)."""
    X_cluster = np.atleast_2d(np.asarray(X_cluster, dtype=float))
    q = X_cluster.shape[1]
    total, s, ss = 0.0, np.zeros(q), np.zeros((q, q))
    for k, x in enumerate(X_cluster):
        total += float(x_collapsed_predictive_logpdf(x, k, s, ss, omega))
        s = s + x
        ss = ss + np.outer(x, x)
    return total
