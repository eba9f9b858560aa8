"""Domain types, dataset validation, hyperparameters and chain initialization.

Cluster labels are 0-based throughout (``xi`` takes values ``0..L-1``).
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, asdict
from typing import Optional

import numpy as np

from .errors import InvalidConfig, NonFinite, ShapeMismatch, TooSmall


@dataclass(frozen=True)
class Dataset:
    Y: np.ndarray
    X: np.ndarray
    gene_names: Optional[tuple] = None

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def p(self) -> int:
        return self.Y.shape[1]

    @property
    def q(self) -> int:
        return self.X.shape[1]


def validate_dataset(raw_Y, raw_X, gene_names=None) -> Dataset:
    """Check shapes and finiteness and return an immutable :class:`Dataset`.

    A 1-D ``raw_X`` is read as a single covariate column.
    """
    Y = np.array(raw_Y, dtype=float)
    X = np.array(raw_X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if Y.ndim != 2 or X.ndim != 2:
        raise ShapeMismatch("Y and X must be 2-D matrices")
    if Y.shape[0] != X.shape[0]:
        raise ShapeMismatch(f"Y has {Y.shape[0]} rows but X has {X.shape[0]}")
    if not (np.all(np.isfinite(Y)) and np.all(np.isfinite(X))):
        raise NonFinite("data contain NaN or Inf")
    if Y.shape[0] < 2 or Y.shape[1] < 2 or X.shape[1] < 1:
        raise TooSmall(f"need n>=2, p>=2, q>=1; got Y {Y.shape}, X {X.shape}")
    if gene_names is not None:
        gene_names = tuple(str(g) for g in gene_names)
        if len(gene_names) != Y.shape[1]:
            raise ShapeMismatch("gene_names length differs from p")
    Y.setflags(write=False)
    X.setflags(write=False)
    return Dataset(Y=Y, X=X, gene_names=gene_names)


Y_PREDICTIVE_MODES = ("exact", "printed")


@dataclass(frozen=True)
class Hyperparams:
    lam: float = 10.0
    a_sigma: float = 2.0
    b_sigma: float = 2.0
    a_phi: float = 1.0
    b_phi: float = 1.0
    a_eta: float = 0.01
    b_eta: float = 0.01
    nu0: float = 0.01
    omega: float = 100.0
    alpha: float = 1.0
    tau_prop: float = 0.05
    temperatures: tuple = (1.0, 1.5, 2.0, 2.5)
    swap_interval: int = 10
    n_iter: int = 1000
    n_burn: int = 250
    m_aux: int = 1
    eps_stab: float = 1e-6
    seed: int = 0
    max_tries: int = 1000
    # collapsed Y-predictive used in the label update: "exact" is the
    # conjugate result with per-unit noise scales, "printed" the literal form
    y_predictive: str = "exact"
    strict_paper_det: bool = False
    include_x_in_swap: bool = False
    temper_xi: bool = True
    b_prior_in_mh: bool = True
    shear_b_proposals: bool = True
    adapt_tau_prop: bool = False
    init_clusters: int = 10
    n_warmup: int = 0

    def __post_init__(self):
        temps = tuple(sorted(float(t) for t in self.temperatures))
        object.__setattr__(self, "temperatures", temps)
        positive = ("lam", "a_sigma", "b_sigma", "a_phi", "b_phi", "a_eta",
                    "b_eta", "omega", "alpha", "tau_prop", "eps_stab")
        for name in positive:
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise InvalidConfig(f"{name} must be > 0, got {v}")
        if not 0 < self.nu0 < 1:
            raise InvalidConfig(f"nu0 must lie in (0, 1), got {self.nu0}")
        if not temps or temps[0] != 1.0:
            raise InvalidConfig("the lowest temperature must be exactly 1")
        if len(set(temps)) != len(temps):
            raise InvalidConfig(f"temperatures must be distinct: {temps}")
        for name in ("swap_interval", "n_iter", "m_aux", "max_tries", "init_clusters"):
            if int(getattr(self, name)) < 1:
                raise InvalidConfig(f"{name} must be a positive integer")
        if not 0 <= self.n_warmup <= self.n_burn:
            raise InvalidConfig("need 0 <= n_warmup <= n_burn")
        if not 0 <= self.n_burn < self.n_iter:
            raise InvalidConfig("need 0 <= n_burn < n_iter")
        if self.seed < 0:
            raise InvalidConfig("seed must be non-negative")
        if self.y_predictive not in Y_PREDICTIVE_MODES:
            raise InvalidConfig(f"y_predictive must be one of {Y_PREDICTIVE_MODES}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["temperatures"] = list(self.temperatures)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparams":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidConfig(f"unknown hyperparameters: {sorted(unknown)}")
        if "temperatures" in d:
            d["temperatures"] = tuple(d["temperatures"])
        return cls(**d)


@dataclass
class ClusterParams:
    B: np.ndarray
    M: np.ndarray
    sigma: np.ndarray
    gamma: np.ndarray
    eta: float
    phi: float

    def copy(self) -> "ClusterParams":
        return ClusterParams(self.B.copy(), self.M.copy(), self.sigma.copy(),
                             self.gamma.copy(), float(self.eta), float(self.phi))


@dataclass
class ChainState:
    xi: np.ndarray
    clusters: list
    tau: np.ndarray
    temperature: float
    rng: np.random.Generator
    tau_prop: float = 0.05
    b_accept: int = 0
    b_propose: int = 0

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    def params_copy(self) -> "ChainState":
        """Deep copy of everything except the RNG stream, which is shared."""
        return ChainState(self.xi.copy(), [c.copy() for c in self.clusters],
                          self.tau.copy(), self.temperature, self.rng,
                          self.tau_prop, self.b_accept, self.b_propose)


@dataclass
class Sample:
    iteration: int
    xi: np.ndarray
    clusters: list
    tau: Optional[np.ndarray] = None
    loglik: float = float("nan")


@dataclass
class Trace:
    samples: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.samples)


def chain_rngs(seed: int, n_chains: int) -> list:
    """One independent generator per temperature slot, coldest first."""
    children = np.random.SeedSequence(seed).spawn(n_chains)
    return [np.random.default_rng(s) for s in children]


def draw_inverse_gamma(rng, shape, rate, size=None):
    """Inverse-gamma draw; small shapes can underflow the gamma variate to 0, which is floored."""
    return rate / np.maximum(rng.gamma(shape, 1.0, size=size), np.finfo(float).tiny)


def init_state(data: Dataset, hp: Hyperparams, temperature: float = 1.0,
               rng: Optional[np.random.Generator] = None) -> ChainState:
    """Start a chain with B = 0 in every cluster.

    With ``hp.init_clusters == 1``, or fewer than ``5 * init_clusters``
    units, everyone shares one cluster. Otherwise the labels start from
    k-means on the standardized covariates, deliberately over-clustered:
    the label update merges clusters far more readily than it splits them.
    """
    if rng is None:
        rng = chain_rngs(hp.seed, 1)[0]
    n, p = data.n, data.p
    if hp.init_clusters > 1 and n >= 5 * hp.init_clusters:
        xi = _kmeans_labels(data.X, hp.init_clusters, rng)
    else:
        xi = np.zeros(n, dtype=np.int64)
    clusters = []
    for _ in range(int(xi.max()) + 1):
        clusters.append(ClusterParams(
            B=np.zeros((p, p)),
            M=np.zeros(p),
            sigma=draw_inverse_gamma(rng, hp.a_sigma, hp.b_sigma, size=p),
            gamma=np.zeros((p, p), dtype=np.int8),
            eta=float(draw_inverse_gamma(rng, hp.a_eta, hp.b_eta)),
            phi=float(rng.beta(hp.a_phi, hp.b_phi)),
        ))
    return ChainState(xi=xi, clusters=clusters, tau=np.ones((n, p)),
                      temperature=float(temperature), rng=rng, tau_prop=hp.tau_prop)


def _kmeans_labels(X, k, rng):
    from scipy.cluster.vq import kmeans2

    Z = (X - X.mean(0)) / np.where(X.std(0) > 0, X.std(0), 1.0)
    _, labels = kmeans2(Z, k, minit="++", seed=rng)
    return compact_labels(labels)


def compact_labels(xi: np.ndarray) -> np.ndarray:
    """Relabel to ``0..L-1`` in order of first appearance."""
    _, first, inverse = np.unique(xi, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inverse].astype(np.int64)


def snapshot(state: ChainState, iteration: int, loglik: float = float("nan"),
             keep_tau: bool = True) -> Sample:
    return Sample(iteration=iteration, xi=state.xi.copy(),
                  clusters=[c.copy() for c in state.clusters],
                  tau=state.tau.copy() if keep_tau else None, loglik=loglik)

