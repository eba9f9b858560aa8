"""Edge-recovery metrics, cluster alignment and curve-recovery diagnostics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ShapeMismatch
from .model import Dataset, Hyperparams, Trace
from .predict import fitted_graphs, predict_many


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(est, truth) -> ConfusionCounts:
    """Directed-edge counts over the off-diagonal entries of two adjacency matrices."""
    est = np.asarray(est) != 0
    truth = np.asarray(truth) != 0
    if est.shape != truth.shape or est.ndim != 2 or est.shape[0] != est.shape[1]:
        raise ShapeMismatch(f"adjacency shapes differ: {est.shape} vs {truth.shape}")
    off = ~np.eye(est.shape[0], dtype=bool)
    e, t = est[off], truth[off]
    return ConfusionCounts(tp=int(np.sum(e & t)), fp=int(np.sum(e & ~t)),
                           tn=int(np.sum(~e & ~t)), fn=int(np.sum(~e & t)))


def _ratio(num, den) -> float:
    return float(num / den) if den else 0.0


def tpr_fdr_mcc(c: ConfusionCounts) -> tuple[float, float, float]:
    """TPR, FDR and Matthews correlation; any 0/0 ratio is reported as 0."""
    tpr = _ratio(c.tp, c.tp + c.fn)
    fdr = _ratio(c.fp, c.tp + c.fp)
    den = float(c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn)
    mcc = _ratio(float(c.tn) * c.tp - float(c.fn) * c.fp, np.sqrt(den))
    return tpr, fdr, mcc


@dataclass
class Alignment:
    mapping: dict
    accuracy: float


def contingency(est_xi, true_xi) -> np.ndarray:
    est_xi = np.asarray(est_xi)
    true_xi = np.asarray(true_xi)
    _, e = np.unique(est_xi, return_inverse=True)
    _, t = np.unique(true_xi, return_inverse=True)
    table = np.zeros((e.max() + 1, t.max() + 1), dtype=np.int64)
    np.add.at(table, (e, t), 1)
    return table


def align_clusters(est_xi, true_xi) -> Alignment:
    """Maximal-overlap one-to-one matching of estimated to true labels."""
    est_xi = np.asarray(est_xi)
    true_xi = np.asarray(true_xi)
    if est_xi.shape != true_xi.shape:
        raise ShapeMismatch("label vectors differ in length")
    table = contingency(est_xi, true_xi)
    rows, cols = linear_sum_assignment(-table)
    e_labels, t_labels = np.unique(est_xi), np.unique(true_xi)
    mapping = {int(e_labels[r]): int(t_labels[c]) for r, c in zip(rows, cols)}
    return Alignment(mapping, float(table[rows, cols].sum() / est_xi.size))


def coclustering(trace: Trace) -> np.ndarray:
    """Posterior probability that each pair of units shares a cluster."""
    n = trace.samples[0].xi.size
    P = np.zeros((n, n))
    for s in trace.samples:
        P += s.xi[:, None] == s.xi[None, :]
    return P / len(trace.samples)


def dahl_estimate(trace: Trace) -> np.ndarray:
    """The retained partition closest in squared error to the co-clustering matrix."""
    P = coclustering(trace)
    best, best_loss = None, np.inf
    for s in trace.samples:
        loss = np.sum(((s.xi[:, None] == s.xi[None, :]) - P) ** 2)
        if loss < best_loss:
            best, best_loss = s.xi, loss
    return best.copy()


def scenario1_metrics(trace: Trace, data: Dataset, true_xi, true_edges,
                      threshold: float = 0.5) -> dict:
    """Per-true-cluster TPR/FDR/MCC averaged over the units' fitted graphs.

    ``true_edges[l]`` is the true adjacency of cluster ``l``; units are grouped
    by their true label, so no estimated labels are involved.
    """
    fg = fitted_graphs(trace, data, threshold)
    true_xi = np.asarray(true_xi)
    out = {}
    for l, truth in enumerate(true_edges):
        units = np.flatnonzero(true_xi == l)
        vals = np.array([tpr_fdr_mcc(confusion(fg.unit_edges[i], truth)) for i in units])
        out[str(l)] = dict(zip(("tpr", "fdr", "mcc"), map(float, vals.mean(0))))
    point = dahl_estimate(trace)
    return {"clusters": out, "clustering_accuracy": align_clusters(point, true_xi).accuracy,
            "n_clusters_point_estimate": int(point.max() + 1)}


@dataclass
class CurveRecovery:
    entries: list
    rmse: dict
    coverage: dict


def curve_recovery(trace: Trace, truth_fn, grid, data: Dataset, hp: Hyperparams,
                   seed: int = 0, predictions=None) -> CurveRecovery:
    """Posterior-mean RMSE and mean +/- 2 sd coverage of each true nonzero entry over ``grid``."""
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    preds = predict_many(grid, trace, data, hp, seed) if predictions is None else predictions
    mean = np.stack([p.B_mean for p in preds])
    sd = np.stack([p.B_sd for p in preds])
    truth = np.stack([np.asarray(truth_fn(x), dtype=float) for x in grid])
    entries = [(int(j), int(k)) for j, k in zip(*np.nonzero(np.any(truth != 0, axis=0)))]
    rmse, cov = {}, {}
    for j, k in entries:
        err = mean[:, j, k] - truth[:, j, k]
        rmse[f"{j},{k}"] = float(np.sqrt(np.mean(err ** 2)))
        cov[f"{j},{k}"] = float(np.mean(np.abs(err) <= 2.0 * sd[:, j, k]))
    return CurveRecovery(entries, rmse, cov)


def slice_grid(step: float = 0.05, fixed=(0.25, 0.5, 0.75), lo: float = 0.05,
               hi: float = 0.95) -> np.ndarray:
    """Points varying one coordinate over [lo, hi] with the other held at each ``fixed`` value."""
    vary = np.round(np.arange(lo, hi + step / 2, step), 10)
    pts = [(v, f) for f in fixed for v in vary] + [(f, v) for f in fixed for v in vary]
    return np.array(pts, dtype=float)


def drop_corner(grid, lo: float = 0.95) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    return grid[~np.all(grid >= lo, axis=1)]
