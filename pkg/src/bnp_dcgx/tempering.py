"""Replica exchange over a fixed temperature ladder."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfig
from .model import ChainState, Dataset, Hyperparams, Trace, init_state, snapshot
from .sampler import adapt_step_size, loglik_x, loglik_y, sweep


@dataclass(frozen=True)
class TemperingSchedule:
    temperatures: tuple
    swap_interval: int = 10
    swap_strategy: str = "adjacent-alternating"

    def __post_init__(self):
        temps = tuple(sorted(float(t) for t in self.temperatures))
        if not temps:
            raise InvalidConfig("need at least one temperature")
        if temps.count(1.0) != 1 or temps[0] != 1.0:
            raise InvalidConfig("temperature 1 must be present exactly once and be the lowest")
        if len(set(temps)) != len(temps):
            raise InvalidConfig("temperatures must be distinct")
        if self.swap_interval < 1:
            raise InvalidConfig("swap_interval must be positive")
        object.__setattr__(self, "temperatures", temps)

    @classmethod
    def from_hyperparams(cls, hp: Hyperparams) -> "TemperingSchedule":
        return cls(hp.temperatures, hp.swap_interval)

    @property
    def n_chains(self) -> int:
        return len(self.temperatures)

    def pairs(self, event: int) -> list:
        """Adjacent pairs proposed at the ``event``-th swap round (0-based)."""
        start = event % 2
        return [(a, a + 1) for a in range(start, self.n_chains - 1, 2)]


def chain_loglik(state: ChainState, data: Dataset, hp: Hyperparams) -> float:
    """Log likelihood entering the swap ratio."""
    ll = loglik_y(state, data, hp)
    if hp.include_x_in_swap:
        ll += loglik_x(state, data, hp)
    return ll


def swap_log_ratio(stateA: ChainState, stateB: ChainState, data: Dataset,
                   hp: Hyperparams, llA: float | None = None, llB: float | None = None) -> float:
    """Log acceptance ratio for exchanging the states held at temperatures T_A and T_B."""
    if stateA.temperature == stateB.temperature:
        return 0.0
    llA = chain_loglik(stateA, data, hp) if llA is None else llA
    llB = chain_loglik(stateB, data, hp) if llB is None else llB
    if llA == llB:
        return 0.0
    return (1.0 / stateB.temperature - 1.0 / stateA.temperature) * (llA - llB)


def exchange(chains: list, a: int, b: int) -> None:
    """Swap the states in slots ``a`` and ``b``; temperatures and RNG streams stay put."""
    A, B = chains[a], chains[b]
    for name in ("xi", "clusters", "tau"):
        va, vb = getattr(A, name), getattr(B, name)
        setattr(A, name, vb)
        setattr(B, name, va)


def n_workers(n_chains: int) -> int:
    env = os.environ.get("BNP_DCGX_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(n_chains, cap))


def _advance(args):
    """Sweep one chain over iterations ``start+1..stop``; record it if ``record``."""
    state, data, hp, start, stop, record, keep_tau = args
    samples, acc, prop = [], 0, 0
    for it in range(start + 1, stop + 1):
        sweep(state, data, hp, update_labels=it > hp.n_warmup)
        if hp.adapt_tau_prop and it <= hp.n_burn:
            adapt_step_size(state, it)
        if record and it > hp.n_burn:
            acc += state.b_accept
            prop += state.b_propose
            samples.append(snapshot(state, it, loglik_y(state, data, hp), keep_tau))
    return state, samples, acc, prop


def _seed_sequences(seed: int, n_chains: int):
    children = np.random.SeedSequence(seed).spawn(n_chains + 1)
    return children[:n_chains], children[n_chains]


def run_tempered(data: Dataset, hp: Hyperparams, workers: int | None = None,
                 keep_tau: bool = False, progress=None) -> Trace:
    """Run one chain per temperature and return the cold chain's post-burn-in trace.

    Chains advance independently between swap rounds, so they may run in
    separate processes (``workers`` or ``BNP_DCGX_THREADS``); the output
    does not depend on the worker count.
    """
    sched = TemperingSchedule.from_hyperparams(hp)
    W = sched.n_chains
    chain_ss, swap_ss = _seed_sequences(hp.seed, W)
    chains = [init_state(data, hp, T, np.random.default_rng(ss))
              for T, ss in zip(sched.temperatures, chain_ss)]
    swap_rng = np.random.default_rng(swap_ss)
    workers = n_workers(W) if workers is None else max(1, min(W, int(workers)))
    pool = ProcessPoolExecutor(workers) if workers > 1 else None

    trace = Trace()
    proposed = np.zeros(max(W - 1, 0), dtype=np.int64)
    accepted = np.zeros(max(W - 1, 0), dtype=np.int64)
    swap_log = []
    b_acc = b_prop = 0
    event = 0
    it = 0
    try:
        while it < hp.n_iter:
            stop = min(hp.n_iter, (it // sched.swap_interval + 1) * sched.swap_interval)
            jobs = [(c, data, hp, it, stop, k == 0, keep_tau) for k, c in enumerate(chains)]
            results = [_advance(j) for j in jobs] if pool is None else list(pool.map(_advance, jobs))
            chains = [r[0] for r in results]
            trace.samples.extend(results[0][1])
            b_acc += results[0][2]
            b_prop += results[0][3]
            it = stop
            if W > 1 and it % sched.swap_interval == 0:
                lls = [chain_loglik(c, data, hp) for c in chains]
                for a, b in sched.pairs(event):
                    lr = swap_log_ratio(chains[a], chains[b], data, hp, lls[a], lls[b])
                    ok = bool(np.log(swap_rng.random()) < lr)
                    proposed[a] += 1
                    if ok:
                        accepted[a] += 1
                        exchange(chains, a, b)
                        lls[a], lls[b] = lls[b], lls[a]
                    swap_log.append({"iteration": it, "pair": [a, b],
                                     "log_ratio": float(lr), "accepted": ok})
                event += 1
            if progress is not None:
                progress(it, chains)
    finally:
        if pool is not None:
            pool.shutdown()

    rates = np.divide(accepted, proposed, out=np.zeros(proposed.shape), where=proposed > 0)
    trace.meta = {
        "hyperparams": hp.to_dict(),
        "temperatures": list(sched.temperatures),
        "swap_interval": sched.swap_interval,
        "n_samples": len(trace.samples),
        "iterations": [s.iteration for s in trace.samples],
        "swap_proposed": proposed.tolist(),
        "swap_accepted": accepted.tolist(),
        "swap_acceptance": rates.tolist(),
        "swap_log": swap_log,
        "b_acceptance_cold": (b_acc / b_prop) if b_prop else None,
        "final_tau_prop": [c.tau_prop for c in chains],
    }
    return trace
