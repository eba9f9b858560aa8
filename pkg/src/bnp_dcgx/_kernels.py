"""Compiled inner loop of the label update.

Mirrors :func:`bnp_dcgx.sampler.xi_log_weights` unit by unit; the numpy
version stays as the reference implementation.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

_LOG_2PI = math.log(2.0 * math.pi)


@njit(cache=True)
def _t_logpdf(x, count, sx, sxx, omega, work):
    q = x.size
    shrink = omega / (1.0 + count * omega)
    factor = (omega + 1.0 + count * omega) / ((count + 1.0) * (1.0 + count * omega))
    df = count + 1.0
    # scale = factor * (I - shrink * sx sx' + sxx), Cholesky in place
    L = work
    for a in range(q):
        for b in range(q):
            v = sxx[a, b] - shrink * sx[a] * sx[b]
            if a == b:
                v += 1.0
            L[a, b] = factor * v
    logdet = 0.0
    for j in range(q):
        s = L[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if s <= 0.0:
            return -np.inf
        d = math.sqrt(s)
        L[j, j] = d
        logdet += 2.0 * math.log(d)
        for i in range(j + 1, q):
            s2 = L[i, j]
            for k in range(j):
                s2 -= L[i, k] * L[j, k]
            L[i, j] = s2 / d
    maha = 0.0
    sol = np.empty(q)
    for i in range(q):
        s = x[i] - shrink * sx[i]
        for k in range(i):
            s -= L[i, k] * sol[k]
        sol[i] = s / L[i, i]
        maha += sol[i] * sol[i]
    return (math.lgamma(0.5 * (df + q)) - math.lgamma(0.5 * df)
            - 0.5 * q * math.log(df * math.pi) - 0.5 * logdet
            - 0.5 * (df + q) * math.log1p(maha / df))


@njit(cache=True)
def _y_logpdf(y, tau_i, A, logdetA, sigma, count, sumY, suminv, G, lam, exact):
    p = y.size
    out = logdetA
    for j in range(p):
        z = 0.0
        stat = 0.0
        for l in range(p):
            z += A[j, l] * y[l]
            if exact:
                stat += A[j, l] * G[j, l]
            else:
                stat += A[j, l] * sumY[l]
        s = sigma[j] * tau_i[j]
        if exact:
            prec = 1.0 / lam + suminv[j] / sigma[j]
            mean = (stat / sigma[j]) / prec
            var = s + 1.0 / prec
        else:
            mean = stat / (count + s / lam)
            var = 1.0 / (1.0 - 1.0 / (count + 1.0 + s / lam))
        dz = z - mean
        out -= 0.5 * (_LOG_2PI + math.log(var) + dz * dz / var)
    return out


@njit(cache=True)
def _move(s, x, y, inv, sign, count, sumX, sumXX, sumY, suminv, G):
    count[s] += sign
    q = x.size
    p = y.size
    for a in range(q):
        sumX[s, a] += sign * x[a]
        for b in range(q):
            sumXX[s, a, b] += sign * x[a] * x[b]
    for j in range(p):
        sumY[s, j] += sign * y[j]
        suminv[s, j] += sign * inv[j]
        for l in range(p):
            G[s, j, l] += sign * inv[j] * y[l]


@njit(cache=True)
def xi_pass(Y, X, tau, slot_of, u, A, logdetA, sigma, count, sumX, sumXX, sumY,
            suminv, G, alive, pool_A, pool_logdet, pool_sigma, src, next_free,
            lam, omega, alpha, m_aux, inv_T, exact):
    """Sequential reassignment of all units; returns the next unused slot.

    ``src[s]`` receives the pool index that seeded a newly opened slot.
    """
    n, p = Y.shape
    q = X.shape[1]
    cap = count.size
    work = np.empty((q, q))
    zq = np.zeros(q)
    zqq = np.zeros((q, q))
    zp = np.zeros(p)
    zpp = np.zeros((p, p))
    logw = np.empty(cap + m_aux)
    cand = np.empty(cap + m_aux, dtype=np.int64)
    aux_kind = np.empty(m_aux, dtype=np.int64)  # slot index (>= 0) or -(pool index) - 1
    log_new = math.log(alpha / m_aux)
    ptr = 0
    for i in range(n):
        y = Y[i]
        x = X[i]
        t_i = tau[i]
        inv = 1.0 / t_i
        c = slot_of[i]
        _move(c, x, y, inv, -1.0, count, sumX, sumXX, sumY, suminv, G)
        n_aux = 0
        if count[c] == 0:
            alive[c] = False
            aux_kind[0] = c
            n_aux = 1
        while n_aux < m_aux:
            aux_kind[n_aux] = -ptr - 1
            ptr += 1
            n_aux += 1
        x_new = _t_logpdf(x, 0.0, zq, zqq, omega, work)
        k = 0
        for s in range(next_free):
            if not alive[s]:
                continue
            ly = _y_logpdf(y, t_i, A[s], logdetA[s], sigma[s], count[s], sumY[s],
                           suminv[s], G[s], lam, exact)
            lx = _t_logpdf(x, count[s], sumX[s], sumXX[s], omega, work)
            logw[k] = math.log(count[s]) + inv_T * (ly + lx)
            cand[k] = s
            k += 1
        n_exist = k
        for a in range(m_aux):
            kind = aux_kind[a]
            if kind >= 0:
                ly = _y_logpdf(y, t_i, A[kind], logdetA[kind], sigma[kind], 0.0, zp,
                               zp, zpp, lam, exact)
            else:
                j = -kind - 1
                ly = _y_logpdf(y, t_i, pool_A[j], pool_logdet[j], pool_sigma[j], 0.0,
                               zp, zp, zpp, lam, exact)
            logw[k] = log_new + inv_T * (ly + x_new)
            k += 1
        mx = -np.inf
        for a in range(k):
            if logw[a] > mx:
                mx = logw[a]
        tot = 0.0
        for a in range(k):
            logw[a] = math.exp(logw[a] - mx)
            tot += logw[a]
        target = u[i] * tot
        acc = 0.0
        choice = k - 1
        for a in range(k):
            acc += logw[a]
            if target <= acc:
                choice = a
                break
        if choice < n_exist:
            s = cand[choice]
        else:
            kind = aux_kind[choice - n_exist]
            if kind >= 0:
                s = kind
            else:
                j = -kind - 1
                s = next_free
                next_free += 1
                A[s] = pool_A[j]
                logdetA[s] = pool_logdet[j]
                sigma[s] = pool_sigma[j]
                src[s] = j
            alive[s] = True
        _move(s, x, y, inv, 1.0, count, sumX, sumXX, sumY, suminv, G)
        slot_of[i] = s
    return next_free
