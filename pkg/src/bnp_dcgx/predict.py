"""Partition-averaged graph estimates at new covariate values and at the observed units."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import sample_cascade_prior
from .likelihood import x_collapsed_predictive_logpdf
from .model import Dataset, Hyperparams, Sample, Trace, compact_labels
from .stability import is_stable


@dataclass
class GraphPrediction:
    B_mean: np.ndarray
    B_sd: np.ndarray
    B_samples: np.ndarray
    edge_prob: np.ndarray
    all_stable: bool

    def to_json(self, x=None) -> dict:
        d = {"B_mean": self.B_mean.tolist(), "B_sd": self.B_sd.tolist(),
             "edge_prob": self.edge_prob.tolist(), "all_stable": bool(self.all_stable)}
        if x is not None:
            d = {"x": np.asarray(x, dtype=float).tolist(), **d}
        return d


def _cluster_x_stats(sample: Sample, X: np.ndarray):
    L = len(sample.clusters)
    q = X.shape[1]
    count = np.bincount(sample.xi, minlength=L).astype(float)
    sx = np.zeros((L, q))
    sxx = np.zeros((L, q, q))
    np.add.at(sx, sample.xi, X)
    np.add.at(sxx, sample.xi, X[:, :, None] * X[:, None, :])
    return count, sx, sxx


def canonical_order(sample: Sample) -> Sample:
    """The same partition with labels in order of each cluster's first member."""
    xi = compact_labels(sample.xi)
    old = sample.xi[np.sort(np.unique(sample.xi, return_index=True)[1])]
    return Sample(sample.iteration, xi, [sample.clusters[l] for l in old], sample.tau,
                  sample.loglik)


def predictive_weights(X_new, sample: Sample, data: Dataset, hp: Hyperparams) -> np.ndarray:
    """Probabilities of joining each of the sample's clusters, then a new one.

    Returns an array of shape (K, L + 1) for K query points; weights are the
    sequential partition prior times the covariate predictive.
    """
    X_new = np.atleast_2d(np.asarray(X_new, dtype=float))
    count, sx, sxx = _cluster_x_stats(sample, data.X)
    q = data.q
    logt = x_collapsed_predictive_logpdf(X_new[:, None, :], count, sx, sxx, hp.omega)
    lognew = x_collapsed_predictive_logpdf(X_new, 0.0, np.zeros(q), np.zeros((q, q)), hp.omega)
    logw = np.concatenate([np.log(count) + logt, np.log(hp.alpha) + lognew[:, None]], axis=1)
    logw -= logw.max(axis=1, keepdims=True)
    w = np.exp(logw)
    return w / w.sum(axis=1, keepdims=True)


def predict_many(X_new, trace: Trace, data: Dataset, hp: Hyperparams, seed: int = 0) -> list:
    """One :class:`GraphPrediction` per row of ``X_new``, each with its own RNG stream.

    Clusters are put in canonical order first, so the output does not depend
    on how any sample happens to label its clusters.
    """
    X_new = np.atleast_2d(np.asarray(X_new, dtype=float))
    if not trace.samples:
        raise ValueError("trace is empty")
    K, p = X_new.shape[0], data.p
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(K)]
    T = len(trace.samples)
    Bs = np.empty((K, T, p, p))
    Gs = np.empty((K, T, p, p))
    for t, sample in enumerate(trace.samples):
        sample = canonical_order(sample)
        W = predictive_weights(X_new, sample, data, hp)
        cum = np.cumsum(W, axis=1)
        for k in range(K):
            u = rngs[k].random()
            l = min(int(np.searchsorted(cum[k], u * cum[k, -1])), W.shape[1] - 1)
            if l < len(sample.clusters):
                Bs[k, t] = sample.clusters[l].B
                Gs[k, t] = sample.clusters[l].gamma
            else:
                draw = sample_cascade_prior(1, p, hp, rngs[k])
                Bs[k, t] = draw.B[0]
                Gs[k, t] = draw.gamma[0]
    out = []
    for k in range(K):
        stable = all(is_stable(B, hp.eps_stab) for B in Bs[k])
        out.append(GraphPrediction(B_mean=Bs[k].mean(0), B_sd=Bs[k].std(0), B_samples=Bs[k],
                                   edge_prob=Gs[k].mean(0), all_stable=stable))
    return out


def predict_B(X_new, trace: Trace, data: Dataset, hp: Hyperparams,
              rng: np.random.Generator | int = 0) -> GraphPrediction:
    """Posterior mean, spread and inclusion frequencies of B at one covariate point."""
    seed = int(rng.integers(2**63)) if isinstance(rng, np.random.Generator) else int(rng)
    return predict_many(np.asarray(X_new, dtype=float)[None, :], trace, data, hp, seed)[0]


@dataclass
class FittedGraphs:
    unit_prob: np.ndarray
    unit_B_mean: np.ndarray
    unit_edges: np.ndarray
    union_prob: np.ndarray
    union_freq: np.ndarray
    threshold: float


def fitted_graphs(trace: Trace, data: Dataset, threshold: float = 0.5) -> FittedGraphs:
    """Per-unit edge inclusion frequencies over the trace, thresholded, plus their union.

    ``union_prob`` averages the per-unit frequencies; ``union_freq`` is the
    share of units whose thresholded graph contains the edge.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    if not trace.samples:
        raise ValueError("trace is empty")
    n, p = data.n, data.p
    prob = np.zeros((n, p, p))
    bmean = np.zeros((n, p, p))
    for s in trace.samples:
        G = np.stack([c.gamma for c in s.clusters]).astype(float)
        B = np.stack([c.B for c in s.clusters])
        prob += G[s.xi]
        bmean += B[s.xi]
    T = len(trace.samples)
    prob /= T
    bmean /= T
    edges = prob > threshold
    return FittedGraphs(unit_prob=prob, unit_B_mean=bmean, unit_edges=edges,
                        union_prob=prob.mean(0), union_freq=edges.mean(0), threshold=threshold)
