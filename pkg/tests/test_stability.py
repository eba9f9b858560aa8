import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from bnp_dcgx.errors import EigenFailure
from bnp_dcgx.stability import (is_stable, radius_and_logdet, spectral_radius,
                                stability_report)

finite = st.floats(-3, 3, allow_nan=False)


def test_radius_examples():
    assert spectral_radius(np.zeros((2, 2))) == 0.0
    assert spectral_radius(np.array([[0.0, 2.0], [0.0, 0.0]])) == 0.0
    assert spectral_radius(np.array([[0.0, 0.5], [0.5, 0.0]])) == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("c", [-0.9, -0.3, 0.4, 0.99, 1.7])
def test_three_cycle_radius(c):
    B = np.zeros((3, 3))
    B[1, 0] = B[2, 1] = B[0, 2] = c
    # eigenvalues of a weighted 3-cycle are the cube roots of c^3
    roots = np.roots([1.0, 0.0, 0.0, -c ** 3])
    assert spectral_radius(B) == pytest.approx(np.abs(roots).max(), rel=1e-12)
    assert spectral_radius(B) == pytest.approx(abs(c), rel=1e-12)


def test_is_stable_examples():
    assert is_stable(np.zeros((3, 3)), 1e-6)
    assert not is_stable(np.array([[0.0, 1.0], [1.0, 0.0]]), 1e-6)
    assert is_stable(np.array([[0.0, 0.99], [0.99, 0.0]]), 1e-6)


def test_unit_modulus_complex_pair_is_excluded():
    # rotation by 90 degrees: eigenvalues +-i, allowed by "no eigenvalue is 1"
    # but excluded by the strict radius criterion
    R = np.array([[0.0, -1.0], [1.0, 0.0]])
    assert not is_stable(R, 1e-6)
    rep = stability_report(R)
    assert rep.spectral_radius == pytest.approx(1.0)
    assert rep.max_real_eigenvalue_gap == pytest.approx(np.sqrt(2.0))


def test_nonfinite_raises():
    with pytest.raises(EigenFailure):
        spectral_radius(np.array([[0.0, np.nan], [0.0, 0.0]]))


@given(arrays(float, (4, 4), elements=finite), st.permutations(range(4)))
def test_permutation_invariance(B, perm):
    P = np.eye(4)[list(perm)]
    assert spectral_radius(P @ B @ P.T) == pytest.approx(spectral_radius(B), rel=1e-8, abs=1e-10)
    assert is_stable(P @ B @ P.T) == is_stable(B) or abs(spectral_radius(B) - (1 - 1e-6)) < 1e-8


@given(arrays(float, (3, 3), elements=finite), st.floats(-4, 4, allow_nan=False))
def test_radius_scales_linearly(B, c):
    assert spectral_radius(c * B) == pytest.approx(abs(c) * spectral_radius(B), rel=1e-7, abs=1e-9)


@given(arrays(float, (4, 4), elements=finite))
def test_stable_implies_invertible_and_logdet_matches(B):
    rho, logdet, sign = radius_and_logdet(B)
    s_ref, ld_ref = np.linalg.slogdet(np.eye(4) - B)
    if rho <= 1 - 1e-6:
        assert abs(np.linalg.det(np.eye(4) - B)) > 0
    if s_ref != 0:
        assert logdet == pytest.approx(ld_ref, abs=1e-8)
        assert sign == s_ref
