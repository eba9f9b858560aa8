"""Stability predicate for SEM coefficient matrices.

A matrix is treated as stable when its spectral radius is at most
``1 - eps_stab``; this excludes every unit-modulus eigenvalue, not only 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .errors import EigenFailure


@dataclass(frozen=True)
class StabilityReport:
    spectral_radius: float
    max_real_eigenvalue_gap: float
    stable: bool


def eigenvalues(B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Real and imaginary parts of the eigenvalues of a dense real matrix."""
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {B.shape}")
    if B.shape[0] == 0:
        return np.zeros(0), np.zeros(0)
    if not np.all(np.isfinite(B)):
        raise EigenFailure("matrix has non-finite entries")
    wr, wi, _, _, info = lapack.dgeev(B, compute_vl=0, compute_vr=0)
    if info != 0:
        raise EigenFailure(f"dgeev returned info={info}")
    return wr, wi


def spectral_radius(B: np.ndarray) -> float:
    wr, wi = eigenvalues(B)
    return float(np.hypot(wr, wi).max()) if wr.size else 0.0


def is_stable(B: np.ndarray, eps_stab: float = 1e-6) -> bool:
    return spectral_radius(B) <= 1.0 - eps_stab


def stability_report(B: np.ndarray, eps_stab: float = 1e-6) -> StabilityReport:
    wr, wi = eigenvalues(B)
    if wr.size == 0:
        return StabilityReport(0.0, 1.0, True)
    rho = float(np.hypot(wr, wi).max())
    gap = float(np.hypot(wr - 1.0, wi).min())
    return StabilityReport(rho, gap, rho <= 1.0 - eps_stab)


def radius_and_logdet(B: np.ndarray) -> tuple[float, float, float]:
    """Spectral radius of ``B`` plus ``log|det(I - B)|`` and the sign of ``det(I - B)``.

    Both come from one eigendecomposition: det(I - B) is the product of
    ``1 - lambda`` over the eigenvalues.
    """
    wr, wi = eigenvalues(B)
    if wr.size == 0:
        return 0.0, 0.0, 1.0
    rho = float(np.hypot(wr, wi).max())
    mod = np.hypot(1.0 - wr, wi)
    real_factors = 1.0 - wr[wi == 0.0]
    sign = -1.0 if np.count_nonzero(real_factors < 0) % 2 else 1.0
    if np.any(mod == 0.0):
        return rho, -np.inf, 0.0
    return rho, float(np.log(mod).sum()), sign
