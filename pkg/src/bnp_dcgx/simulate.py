"""Synthetic datasets with known graphs: piecewise-constant clusters and a smoothly varying cycle."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import numpy as np

from .errors import UnstableTruth
from .model import Dataset, validate_dataset
from .stability import spectral_radius

SCENARIO1_CENTERS = (-5.0, 0.0, 5.0)
SCENARIO1_INTERCEPTS = (-0.2, 0.0, 0.2)
NOISE_SCALE = 0.1


@dataclass
class GroundTruth:
    scenario: int
    true_B: list
    true_M: list
    true_sigma: list
    true_xi: Optional[np.ndarray] = None
    skeletons: Optional[list] = None
    spectral_radius: list = field(default_factory=list)

    def edge_matrices(self) -> list:
        """Binary adjacency (B != 0) for each true cluster or design point."""
        return [(np.asarray(B) != 0).astype(np.int8) for B in self.true_B]

    def to_json(self) -> dict:
        d = {
            "scenario": self.scenario,
            "true_B": [np.asarray(B).tolist() for B in self.true_B],
            "true_M": [np.asarray(M).tolist() for M in self.true_M],
            "true_sigma": [np.asarray(s).tolist() for s in self.true_sigma],
            "skeletons": self.skeletons,
            "spectral_radius": [float(r) for r in self.spectral_radius],
        }
        if self.true_xi is not None:
            d["true_xi"] = np.asarray(self.true_xi).tolist()
        return d

    @classmethod
    def from_json(cls, d: dict) -> "GroundTruth":
        xi = d.get("true_xi")
        return cls(scenario=int(d["scenario"]),
                   true_B=[np.array(B, dtype=float) for B in d["true_B"]],
                   true_M=[np.array(M, dtype=float) for M in d["true_M"]],
                   true_sigma=[np.array(s, dtype=float) for s in d["true_sigma"]],
                   true_xi=None if xi is None else np.array(xi, dtype=np.int64),
                   skeletons=d.get("skeletons"),
                   spectral_radius=list(d.get("spectral_radius", [])))


def load_skeletons() -> list:
    text = resources.files("bnp_dcgx").joinpath("data/scenario1_skeletons.json").read_text()
    return json.loads(text)["skeletons"]


def draw_coefficients(n_edges: int, rng) -> np.ndarray:
    """Mixture 0.5*U(0.6, 0.8) + 0.5*U(-0.8, -0.6)."""
    positive = rng.random(n_edges) < 0.5
    mag = rng.uniform(0.6, 0.8, size=n_edges)
    return np.where(positive, mag, -mag)


def _coefficient_matrix(skeleton, p, rng, max_redraws=100):
    rows, cols = np.array(skeleton).T
    for _ in range(max_redraws):
        B = np.zeros((p, p))
        B[rows, cols] = draw_coefficients(len(skeleton), rng)
        if abs(np.linalg.det(np.eye(p) - B)) > 1e-12:
            return B
    raise UnstableTruth("I - B stayed singular after repeated redraws")


def gen_scenario1(n_per_cluster: int = 250, seed: int = 0, skeletons=None,
                  p: int = 10) -> tuple[Dataset, GroundTruth]:
    """Three clusters with fixed cyclic skeletons, separated in a 2-D covariate space."""
    if n_per_cluster < 1:
        raise ValueError("n_per_cluster must be >= 1")
    rng = np.random.default_rng(seed)
    skeletons = load_skeletons() if skeletons is None else skeletons
    Ys, Xs, xi, Bs, Ms = [], [], [], [], []
    for l, (skel, c_x, c_m) in enumerate(zip(skeletons, SCENARIO1_CENTERS, SCENARIO1_INTERCEPTS)):
        B = _coefficient_matrix(skel, p, rng)
        M = c_m + 1e-2 * rng.standard_normal(p)
        tau = rng.exponential(1.0, size=(n_per_cluster, p))
        E = np.sqrt(NOISE_SCALE * tau) * rng.standard_normal((n_per_cluster, p))
        Y = np.linalg.solve(np.eye(p) - B, (M + E).T).T
        X = c_x + rng.standard_normal((n_per_cluster, 2))
        Ys.append(Y)
        Xs.append(X)
        xi.append(np.full(n_per_cluster, l))
        Bs.append(B)
        Ms.append(M)
    data = validate_dataset(np.vstack(Ys), np.vstack(Xs),
                            gene_names=[f"g{j + 1}" for j in range(p)])
    truth = GroundTruth(scenario=1, true_B=Bs, true_M=Ms,
                        true_sigma=[np.full(p, NOISE_SCALE)] * len(Bs),
                        true_xi=np.concatenate(xi), skeletons=[list(map(list, s)) for s in skeletons],
                        spectral_radius=[spectral_radius(B) for B in Bs])
    return data, truth


def f_curve(z):
    """``tanh(3z - 3/2) + 0.1``, written as the ratio of exponentials."""
    z = np.asarray(z, dtype=float)
    a, b = np.exp(3.0 * z), np.exp(3.0 * (1.0 - z))
    out = (a - b) / (a + b) + 0.1
    return float(out) if out.ndim == 0 else out


SCENARIO2_EDGES = ((1, 0), (0, 2), (2, 1))


def scenario2_B(x) -> np.ndarray:
    """True 3x3 coefficient matrix of the covariate-dependent cycle 1->2->3->1.

    Accepts one point (2,) or a stack (..., 2).
    """
    x = np.asarray(x, dtype=float)
    x1, x2 = x[..., 0], x[..., 1]
    B = np.zeros(x.shape[:-1] + (3, 3))
    B[..., 1, 0] = f_curve(np.sqrt(x1 * x2))
    B[..., 0, 2] = f_curve(np.sqrt((x1 ** 2 + x2 ** 2) / 2.0))
    B[..., 2, 1] = f_curve((x1 + x2) / 2.0)
    return B


def gen_scenario2(n: int = 800, seed: int = 0) -> tuple[Dataset, GroundTruth]:
    """One cluster whose cyclic graph coefficients vary smoothly over the unit square."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    p = 3
    X = rng.random((n, 2))
    Bx = scenario2_B(X)
    A = np.eye(p) - Bx
    det = np.linalg.det(A)
    if np.any(np.abs(det) < 1e-12):
        raise UnstableTruth("I - B(x) is singular at a design point")
    M = np.ones(p)
    tau = rng.exponential(1.0, size=(n, p))
    E = np.sqrt(NOISE_SCALE * tau) * rng.standard_normal((n, p))
    Y = np.linalg.solve(A, (M + E)[..., None])[..., 0]
    data = validate_dataset(Y, X, gene_names=[f"g{j + 1}" for j in range(p)])
    truth = GroundTruth(scenario=2, true_B=list(Bx), true_M=[M] * n,
                        true_sigma=[np.full(p, NOISE_SCALE)] * n,
                        skeletons=[[list(e) for e in SCENARIO2_EDGES]],
                        spectral_radius=[float(r) for r in np.abs(np.linalg.eigvals(Bx)).max(1)])
    return data, truth
