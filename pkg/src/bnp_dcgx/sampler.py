"""Within-chain MCMC updates and their composition into one sweep."""
from __future__ import annotations

import numpy as np
from scipy.special import expit

from .distributions import (LOG_2PI, normal_logpdf, sample_cascade_prior,
                            sample_gig_half)
from .errors import EigenFailure
from .likelihood import (sem_marginal_loglik, x_collapsed_predictive_logpdf,
                         x_marginal_loglik, y_predictive_batch)
from .model import ChainState, ClusterParams, Dataset, Hyperparams, compact_labels, draw_inverse_gamma
from .stability import radius_and_logdet


def _offdiag(p):
    return ~np.eye(p, dtype=bool)


def residuals(cluster: ClusterParams, Y_S: np.ndarray) -> np.ndarray:
    """``r_ij = y_ij - sum_k B_jk y_ik - M_j`` for every member row."""
    return Y_S - Y_S @ cluster.B.T - cluster.M


def update_phi(cluster: ClusterParams, hp: Hyperparams, rng) -> float:
    p = cluster.B.shape[0]
    n_edges = int(cluster.gamma[_offdiag(p)].sum())
    cluster.phi = float(rng.beta(n_edges + hp.a_phi, p * p - p - n_edges + hp.b_phi))
    return cluster.phi


def update_sigma(cluster: ClusterParams, Y_S, tau_S, hp: Hyperparams, rng) -> np.ndarray:
    r = residuals(cluster, Y_S)
    shape = hp.a_sigma + 0.5 * Y_S.shape[0]
    rate = hp.b_sigma + 0.5 * np.sum(r * r / tau_S, axis=0)
    cluster.sigma = draw_inverse_gamma(rng, shape, rate)
    return cluster.sigma


def intercept_conditional(cluster: ClusterParams, Y_S, tau_S, lam):
    """Mean and variance of the Gaussian full conditional of M (diagonal)."""
    Z = Y_S - Y_S @ cluster.B.T
    w = 1.0 / (cluster.sigma * tau_S)
    prec = 1.0 / lam + w.sum(0)
    return (Z * w).sum(0) / prec, 1.0 / prec


def update_M(cluster: ClusterParams, Y_S, tau_S, hp: Hyperparams, rng) -> np.ndarray:
    mean, var = intercept_conditional(cluster, Y_S, tau_S, hp.lam)
    cluster.M = mean + np.sqrt(var) * rng.standard_normal(mean.shape)
    return cluster.M


def inclusion_probability(B, phi, eta, nu0):
    """Full-conditional probability that each edge indicator is 1."""
    slab = np.log(phi) + normal_logpdf(B, 0.0, eta) if phi > 0 else -np.inf
    spike = np.log1p(-phi) + normal_logpdf(B, 0.0, nu0 * eta) if phi < 1 else -np.inf
    return expit(slab - spike)


def update_gamma(cluster: ClusterParams, hp: Hyperparams, rng) -> np.ndarray:
    p = cluster.B.shape[0]
    theta = inclusion_probability(cluster.B, cluster.phi, cluster.eta, hp.nu0)
    gamma = (rng.random((p, p)) < theta) & _offdiag(p)
    cluster.gamma = gamma.astype(np.int8)
    return cluster.gamma


def update_eta(cluster: ClusterParams, hp: Hyperparams, rng) -> float:
    p = cluster.B.shape[0]
    off = _offdiag(p)
    B, g = cluster.B[off], cluster.gamma[off]
    Bt = np.where(g == 1, B, B / np.sqrt(hp.nu0))
    shape = hp.a_eta + 0.5 * (p * p - p)
    rate = hp.b_eta + 0.5 * float(Bt @ Bt)
    cluster.eta = float(draw_inverse_gamma(rng, shape, rate))
    return cluster.eta


def update_B(cluster: ClusterParams, Y_S, hp: Hyperparams, temperature: float, rng,
             tau_prop: float | None = None) -> tuple[int, int]:
    """Entrywise random-walk Metropolis on the off-diagonal of B.

    Unstable proposals are rejected outright. The tempered Laplace likelihood
    and (unless ``hp.b_prior_in_mh`` is off) the spike-and-slab prior enter
    the acceptance ratio. With ``hp.shear_b_proposals`` a step ``d`` on
    ``B[j, k]`` moves ``M[j]`` by ``-d * mean(Y[:, k])`` so the residual mean
    of gene j stays put; the move is a fixed shear, hence symmetric, and the
    intercept prior joins the ratio. Returns ``(accepted, proposed)``.
    """
    p = cluster.B.shape[0]
    if p < 2:
        return 0, 0
    tau_prop = hp.tau_prop if tau_prop is None else tau_prop
    thresh = 1.0 - hp.eps_stab
    B, M = cluster.B, cluster.M
    R = residuals(cluster, Y_S)
    n_S = Y_S.shape[0]
    shear = hp.shear_b_proposals and n_S > 0
    ybar = Y_S.mean(0) if shear else np.zeros(p)
    w = np.sqrt(2.0 / cluster.sigma)
    _, cur_logdet, _ = radius_and_logdet(B)
    var = cluster.eta * np.where(cluster.gamma == 1, 1.0, hp.nu0)
    rows, cols = np.nonzero(_offdiag(p))
    steps = tau_prop * rng.standard_normal(rows.size)
    log_u = np.log(rng.random(rows.size))
    inv_T = 1.0 / temperature
    accepted = 0
    for j, k, d, lu in zip(rows, cols, steps, log_u):
        old = B[j, k]
        new = old + d
        B[j, k] = new
        try:
            rho, logdet, sign = radius_and_logdet(B)
        except EigenFailure:
            B[j, k] = old
            continue
        if rho > thresh or (hp.strict_paper_det and sign <= 0):
            B[j, k] = old
            continue
        r_new = R[:, j] - d * (Y_S[:, k] - ybar[k])
        dll = n_S * (logdet - cur_logdet) - w[j] * (np.abs(r_new).sum() - np.abs(R[:, j]).sum())
        log_ratio = inv_T * dll
        if hp.b_prior_in_mh:
            log_ratio += (old * old - new * new) / (2.0 * var[j, k])
        m_new = M[j] - d * ybar[k]
        if shear:
            log_ratio += (M[j] * M[j] - m_new * m_new) / (2.0 * hp.lam)
        if lu < log_ratio:
            R[:, j] = r_new
            M[j] = m_new
            cur_logdet = logdet
            accepted += 1
        else:
            B[j, k] = old
    return accepted, int(rows.size)


def unit_residuals(state: ChainState, data: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Residual and noise-scale matrices (n x p) under each unit's current cluster."""
    R = np.empty_like(data.Y)
    S = np.empty_like(data.Y)
    for l, cl in enumerate(state.clusters):
        m = state.xi == l
        R[m] = residuals(cl, data.Y[m])
        S[m] = cl.sigma
    return R, S


def update_tau(state: ChainState, data: Dataset) -> np.ndarray:
    R, S = unit_residuals(state, data)
    state.tau = np.asarray(sample_gig_half(R * R / S, state.rng))
    return state.tau


def _aux_new_cluster_logpdf(y, tau_i, A, logdetA, sigma, lam, mode):
    z = A @ y
    s = sigma * tau_i
    var = s + lam if mode == "exact" else 1.0 + lam / s
    return logdetA - 0.5 * np.sum(LOG_2PI + np.log(var) + z * z / var, axis=-1)


def xi_log_weights(i, y, x, tau_i, slots, hp, inv_T, aux):
    """Unnormalized log probabilities of each alive slot and each auxiliary component.

    ``slots`` is the dict of stacked per-slot arrays used by :func:`update_xi`;
    ``aux`` a list of ``(A, logdetA, sigma)`` triples.
    """
    idx = np.flatnonzero(slots["alive"])
    logY = y_predictive_batch(y, tau_i, slots["A"][idx], slots["logdetA"][idx],
                              slots["sigma"][idx], slots["count"][idx], slots["sumY"][idx],
                              slots["suminv"][idx], slots["G"][idx], hp.lam, hp.y_predictive)
    logX = x_collapsed_predictive_logpdf(x, slots["count"][idx], slots["sumX"][idx],
                                         slots["sumXX"][idx], hp.omega)
    existing = np.log(slots["count"][idx]) + inv_T * (logY + logX)
    x_new = float(x_collapsed_predictive_logpdf(x, 0, np.zeros_like(x),
                                                np.zeros((x.size, x.size)), hp.omega))
    new = [np.log(hp.alpha / hp.m_aux)
           + inv_T * (_aux_new_cluster_logpdf(y, tau_i, A, ld, sg, hp.lam, hp.y_predictive) + x_new)
           for A, ld, sg in aux]
    return idx, np.concatenate([existing, np.asarray(new, dtype=float)])


def _init_slots(state, data, cap):
    n, p = data.Y.shape
    q = data.X.shape[1]
    slots = {
        "A": np.zeros((cap, p, p)), "logdetA": np.zeros(cap), "sigma": np.ones((cap, p)),
        "count": np.zeros(cap, dtype=np.int64), "sumX": np.zeros((cap, q)),
        "sumXX": np.zeros((cap, q, q)), "sumY": np.zeros((cap, p)),
        "suminv": np.zeros((cap, p)), "G": np.zeros((cap, p, p)),
        "alive": np.zeros(cap, dtype=bool),
    }
    inv = 1.0 / state.tau
    for l, cl in enumerate(state.clusters):
        m = state.xi == l
        Ys, Xs = data.Y[m], data.X[m]
        _set_slot_params(slots, l, cl)
        slots["count"][l] = m.sum()
        slots["sumX"][l] = Xs.sum(0)
        slots["sumXX"][l] = Xs.T @ Xs
        slots["sumY"][l] = Ys.sum(0)
        slots["suminv"][l] = inv[m].sum(0)
        slots["G"][l] = inv[m].T @ Ys
        slots["alive"][l] = True
    return slots


def _set_slot_params(slots, s, cl):
    p = cl.B.shape[0]
    slots["A"][s] = np.eye(p) - cl.B
    _, logdet, _ = radius_and_logdet(cl.B)
    slots["logdetA"][s] = logdet
    slots["sigma"][s] = cl.sigma


def _move(slots, s, x, y, inv_tau, sign):
    slots["count"][s] += sign
    slots["sumX"][s] += sign * x
    slots["sumXX"][s] += sign * np.outer(x, x)
    slots["sumY"][s] += sign * y
    slots["suminv"][s] += sign * inv_tau
    slots["G"][s] += sign * np.outer(inv_tau, y)


def update_xi(state: ChainState, data: Dataset, hp: Hyperparams,
              backend: str = "numba") -> ChainState:
    """Reassign every unit in turn with auxiliary new-cluster components.

    Units are visited in order 0..n-1. A unit that is alone in its cluster
    offers that cluster's parameters as the first auxiliary component; the
    remaining auxiliaries are joint draws from the cascade prior. The
    intercepts are integrated out during the pass and redrawn from their
    full conditionals at the end. ``backend="numpy"`` runs the reference
    implementation; both consume the random stream identically.
    """
    rng = state.rng
    Y, X, tau = data.Y, data.X, state.tau
    n, p = Y.shape
    inv_T = 1.0 / state.temperature if hp.temper_xi else 1.0
    m = hp.m_aux
    L = len(state.clusters)
    slots = _init_slots(state, data, L + n * m)

    pool = sample_cascade_prior(n * m, p, hp, rng)
    pool_sigma = draw_inverse_gamma(rng, hp.a_sigma, hp.b_sigma, size=(n * m, p))
    pool_A = np.eye(p) - pool.B
    pool_sign, pool_logdet = np.linalg.slogdet(pool_A)
    if hp.strict_paper_det:
        pool_logdet = np.where(pool_sign > 0, pool_logdet, -np.inf)
    u = rng.random(n)

    slot_of = state.xi.copy()
    src = np.full(L + n * m, -1, dtype=np.int64)
    if backend == "numba":
        from ._kernels import xi_pass
        xi_pass(np.ascontiguousarray(Y), np.ascontiguousarray(X), np.ascontiguousarray(tau),
                slot_of, u, slots["A"], slots["logdetA"], slots["sigma"],
                slots["count"].astype(float), slots["sumX"], slots["sumXX"], slots["sumY"],
                slots["suminv"], slots["G"], slots["alive"], pool_A, pool_logdet,
                pool_sigma, src, L, hp.lam, hp.omega, hp.alpha, m, inv_T,
                hp.y_predictive == "exact")
    elif backend == "numpy":
        _xi_pass_numpy(Y, X, tau, slot_of, u, slots, pool_A, pool_logdet, pool_sigma,
                       src, L, hp, inv_T)
    else:
        raise ValueError(f"unknown backend {backend!r}")

    params = list(state.clusters) + [None] * (n * m)
    for s in np.flatnonzero(src >= 0):
        k = src[s]
        params[s] = ClusterParams(B=pool.B[k].copy(), M=np.zeros(p),
                                  sigma=pool_sigma[k].copy(), gamma=pool.gamma[k].copy(),
                                  eta=float(pool.eta[k]), phi=float(pool.phi[k]))
    state.xi = compact_labels(slot_of)
    order = slot_of[np.sort(np.unique(slot_of, return_index=True)[1])]
    state.clusters = [params[s] for s in order]
    for l, cl in enumerate(state.clusters):
        mask = state.xi == l
        update_M(cl, Y[mask], tau[mask], hp, rng)
    return state


def _xi_pass_numpy(Y, X, tau, slot_of, u, slots, pool_A, pool_logdet, pool_sigma,
                   src, next_free, hp, inv_T):
    m = hp.m_aux
    ptr = 0
    inv_tau = 1.0 / tau
    for i in range(Y.shape[0]):
        y, x, t_i, it = Y[i], X[i], tau[i], inv_tau[i]
        c = slot_of[i]
        _move(slots, c, x, y, it, -1)
        aux_src = []
        if slots["count"][c] == 0:
            slots["alive"][c] = False
            aux_src.append(("slot", c))
        while len(aux_src) < m:
            aux_src.append(("pool", ptr))
            ptr += 1
        aux = [(slots["A"][k], slots["logdetA"][k], slots["sigma"][k]) if kind == "slot"
               else (pool_A[k], pool_logdet[k], pool_sigma[k]) for kind, k in aux_src]
        idx, logw = xi_log_weights(i, y, x, t_i, slots, hp, inv_T, aux)
        prob = np.exp(logw - logw.max())
        choice = min(int(np.searchsorted(np.cumsum(prob), u[i] * prob.sum())), prob.size - 1)
        if choice < idx.size:
            s = idx[choice]
        else:
            kind, k = aux_src[choice - idx.size]
            if kind == "slot":
                s = k
            else:
                s = next_free
                next_free += 1
                slots["A"][s] = pool_A[k]
                slots["logdetA"][s] = pool_logdet[k]
                slots["sigma"][s] = pool_sigma[k]
                src[s] = k
            slots["alive"][s] = True
        _move(slots, s, x, y, it, +1)
        slot_of[i] = s
    return next_free


def sweep(state: ChainState, data: Dataset, hp: Hyperparams,
          update_labels: bool = True) -> ChainState:
    """One full pass: per-cluster phi, sigma, M, gamma, eta, B; then tau; then labels."""
    rng = state.rng
    acc = prop = 0
    for l, cl in enumerate(state.clusters):
        mask = state.xi == l
        Y_S, tau_S = data.Y[mask], state.tau[mask]
        update_phi(cl, hp, rng)
        update_sigma(cl, Y_S, tau_S, hp, rng)
        update_M(cl, Y_S, tau_S, hp, rng)
        update_gamma(cl, hp, rng)
        update_eta(cl, hp, rng)
        a, n_ = update_B(cl, Y_S, hp, state.temperature, rng, state.tau_prop)
        acc += a
        prop += n_
    state.b_accept, state.b_propose = acc, prop
    update_tau(state, data)
    if update_labels:
        update_xi(state, data, hp)
    return state


def adapt_step_size(state: ChainState, iteration: int, target: float = 0.3) -> None:
    """Robbins-Monro update of the random-walk scale from the last sweep's acceptance."""
    if state.b_propose == 0:
        return
    rate = state.b_accept / state.b_propose
    state.tau_prop = float(state.tau_prop * np.exp((rate - target) / (iteration + 1) ** 0.6))


def loglik_y(state: ChainState, data: Dataset, hp: Hyperparams) -> float:
    """Laplace SEM log likelihood of all units under their clusters."""
    total = 0.0
    for l, cl in enumerate(state.clusters):
        total += sem_marginal_loglik(data.Y[state.xi == l], cl.B, cl.M, cl.sigma,
                                     hp.strict_paper_det)
    return total


def loglik_x(state: ChainState, data: Dataset, hp: Hyperparams) -> float:
    return sum(x_marginal_loglik(data.X[state.xi == l], hp.omega)
               for l in range(len(state.clusters)))
