import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from bnp_dcgx.distributions import laplace_loglik_vector
from bnp_dcgx.likelihood import (ClusterSuffStats, sem_marginal_loglik,
                                 x_collapsed_predictive_logpdf, x_marginal_loglik,
                                 x_predictive_params, y_collapsed_predictive_logpdf)
from conftest import random_stable
from oracles import niw_new_cluster_density_q1, sem_density_oracle, x_cluster_marginal_q1


def test_sem_identity_jacobian(rng):
    Y = rng.standard_normal((4, 3))
    sig = np.array([0.5, 1.0, 2.0])
    ll = sem_marginal_loglik(Y, np.zeros((3, 3)), np.zeros(3), sig)
    assert ll == pytest.approx(float(laplace_loglik_vector(Y, sig).sum()), abs=1e-12)


def test_sem_upper_triangular_matches_oracle(rng):
    B = np.array([[0.0, 0.5], [0.0, 0.0]])
    y = rng.standard_normal((1, 2))
    M, sig = np.array([0.1, -0.2]), np.array([0.7, 1.1])
    assert sem_marginal_loglik(y, B, M, sig) == pytest.approx(sem_density_oracle(y, B, M, sig), abs=1e-12)


def test_sem_random_stable_matches_oracle(rng):
    worst = 0.0
    for _ in range(100):
        B = random_stable(rng, 3, rng.uniform(0.1, 0.95))
        Y = rng.standard_normal((5, 3))
        M, sig = rng.standard_normal(3), rng.uniform(0.2, 2.0, 3)
        worst = max(worst, abs(sem_marginal_loglik(Y, B, M, sig) - sem_density_oracle(Y, B, M, sig)))
    assert worst < 1e-10


@given(st.integers(0, 10_000), st.floats(0.05, 0.999))
def test_stable_matrices_have_positive_jacobian(seed, radius):
    # real factors 1 - lambda are positive and complex pairs give |1 - lambda|^2,
    # so the signed and unsigned determinant conventions coincide on stable B
    r = np.random.default_rng(seed)
    B = random_stable(r, 4, radius)
    Y = r.standard_normal((3, 4))
    assert np.linalg.det(np.eye(4) - B) > 0
    assert sem_marginal_loglik(Y, B, np.zeros(4), np.ones(4), strict_paper_det=True) == \
        sem_marginal_loglik(Y, B, np.zeros(4), np.ones(4))


@given(st.permutations(range(3)), st.integers(0, 1000))
def test_sem_gene_permutation_invariance(perm, seed):
    r = np.random.default_rng(seed)
    B = random_stable(r, 3, 0.8)
    Y, M, sig = r.standard_normal((4, 3)), r.standard_normal(3), r.uniform(0.3, 2, 3)
    P = list(perm)
    a = sem_marginal_loglik(Y, B, M, sig)
    b = sem_marginal_loglik(Y[:, P], B[np.ix_(P, P)], M[P], sig[P])
    assert a == pytest.approx(b, abs=1e-10)


def _quadrature_y_predictive_p1(y_new, tau_new, members, taus, sigma, lam):
    """p = 1, B = 0: predictive of y_new given members, intercept integrated numerically."""
    def joint(m, with_new):
        v = stats.norm.pdf(m, 0, np.sqrt(lam)) * np.prod(stats.norm.pdf(members, m, np.sqrt(sigma * taus)))
        return v * stats.norm.pdf(y_new, m, np.sqrt(sigma * tau_new)) if with_new else v
    num = integrate.quad(joint, -50, 50, args=(True,), points=[0.0], limit=200)[0]
    den = integrate.quad(joint, -50, 50, args=(False,), points=[0.0], limit=200)[0]
    return np.log(num / den)


def _stats_p1(members, taus):
    Y = np.asarray(members, float)[:, None]
    return ClusterSuffStats.from_members(Y, np.zeros((len(members), 1)),
                                         np.asarray(taus, float)[:, None], range(len(members)))


def test_y_predictive_exact_matches_quadrature():
    members, taus = np.array([0.4, -0.2, 1.1]), np.array([0.5, 1.7, 0.9])
    sigma, lam, y, t = 0.8, 10.0, 0.6, 1.3
    got = y_collapsed_predictive_logpdf(np.array([y]), np.zeros((1, 1)), np.array([sigma]),
                                        np.array([t]), lam, _stats_p1(members, taus))
    assert got == pytest.approx(_quadrature_y_predictive_p1(y, t, members, taus, sigma, lam), abs=1e-8)


def test_y_predictive_printed_gap_is_reported(capsys):
    members, taus = np.array([0.4, -0.2, 1.1]), np.array([1.0, 1.0, 1.0])
    sigma, lam, y, t = 0.8, 10.0, 0.6, 1.0
    oracle = _quadrature_y_predictive_p1(y, t, members, taus, sigma, lam)
    printed = y_collapsed_predictive_logpdf(np.array([y]), np.zeros((1, 1)), np.array([sigma]),
                                            np.array([t]), lam, _stats_p1(members, taus), mode="printed")
    gap = printed - oracle
    print(f"printed-form collapsed Y predictive, p=1 equal-tau case: log-density gap {gap:+.6f}")
    assert np.isfinite(gap)


def test_y_predictive_new_cluster_closed_forms():
    y, sigma, t, lam = 0.7, 0.5, 2.0, 10.0
    B = np.zeros((1, 1))
    exact = y_collapsed_predictive_logpdf(np.array([y]), B, np.array([sigma]), np.array([t]), lam)
    assert exact == pytest.approx(stats.norm.logpdf(y, 0, np.sqrt(sigma * t + lam)))
    printed = y_collapsed_predictive_logpdf(np.array([y]), B, np.array([sigma]), np.array([t]), lam,
                                            mode="printed")
    # printed variance [1 - (1 + s/lam)^-1]^-1 = 1 + lam/s
    assert printed == pytest.approx(stats.norm.logpdf(y, 0, np.sqrt(1 + lam / (sigma * t))))


def test_y_predictive_includes_jacobian(rng):
    B = random_stable(rng, 3, 0.6)
    y, sig, t = rng.standard_normal(3), rng.uniform(0.5, 1, 3), rng.uniform(0.5, 2, 3)
    lam = 4.0
    got = y_collapsed_predictive_logpdf(y, B, sig, t, lam)
    z = (np.eye(3) - B) @ y
    ref = np.log(abs(np.linalg.det(np.eye(3) - B))) + stats.norm.logpdf(z, 0, np.sqrt(sig * t + lam)).sum()
    assert got == pytest.approx(ref, abs=1e-12)


def test_x_new_cluster_examples():
    v = x_collapsed_predictive_logpdf(np.array([0.0]), 0, np.zeros(1), np.zeros((1, 1)), 100.0)
    assert v == pytest.approx(-1.1447298858494002 - 0.5 * np.log(101.0), abs=1e-12)


@pytest.mark.parametrize("x", [0.0, 0.7, -3.0, 25.0])
def test_x_new_cluster_matches_niw_quadrature(x):
    got = np.exp(x_collapsed_predictive_logpdf(np.array([x]), 0, np.zeros(1), np.zeros((1, 1)), 100.0))
    assert got == pytest.approx(niw_new_cluster_density_q1(x, 100.0), rel=1e-3)


def test_x_new_cluster_integrates_to_one():
    f = lambda x: np.exp(x_collapsed_predictive_logpdf(np.array([x]), 0, np.zeros(1),
                                                       np.zeros((1, 1)), 100.0))
    total = integrate.quad(f, -np.inf, np.inf, epsabs=1e-13, limit=1000)[0]
    assert total == pytest.approx(1.0, abs=1e-6)


def test_x_single_member_at_origin_is_symmetric():
    df, loc, _ = x_predictive_params(1, np.zeros(1), np.zeros((1, 1)), 100.0)
    assert df == 2 and np.allclose(loc, 0)
    f = lambda x: x_collapsed_predictive_logpdf(np.array([x]), 1, np.zeros(1), np.zeros((1, 1)), 100.0)
    for x in (0.3, 1.0, 4.0):
        assert f(x) == pytest.approx(f(-x), abs=1e-14)


@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=6))
def test_x_chain_rule_equals_conjugate_marginal(xs):
    got = x_marginal_loglik(np.array(xs)[:, None], 100.0)
    assert got == pytest.approx(np.log(x_cluster_marginal_q1(np.array(xs), 100.0)), abs=1e-8)


@given(st.lists(st.tuples(st.booleans(), st.integers(0, 7)), min_size=1, max_size=30),
       st.integers(0, 1000))
def test_suffstats_incremental_equals_batch(ops, seed):
    r = np.random.default_rng(seed)
    Y, X, tau = r.standard_normal((8, 3)), r.standard_normal((8, 2)), r.uniform(0.2, 3, (8, 3))
    s = ClusterSuffStats(p=3, q=2)
    members = set()
    for add, i in ops:
        if add and i not in members:
            s.add(i, X[i], Y[i], tau[i])
            members.add(i)
        elif not add and i in members:
            s.remove(i, X[i], Y[i], tau[i])
            members.discard(i)
    assert s.count == len(members) == len(s.member_ids)
    if members:
        b = ClusterSuffStats.from_members(Y, X, tau, members)
        for name in ("sum_X", "sum_XXt", "sum_Y", "sum_inv_tau", "G"):
            assert np.allclose(getattr(s, name), getattr(b, name), atol=1e-10)
