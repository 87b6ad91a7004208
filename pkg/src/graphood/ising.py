"""Ising models on benchmark graphs and ground-truth marginals.

Marginals come from brute-force enumeration for small graphs and from a
sequential-scan Gibbs sampler for larger ones; two estimates are accepted as
equivalent when their mean absolute error is at most 0.02.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graphs import Graph

__all__ = [
    "IsingModel",
    "sample_model",
    "exact_marginals",
    "gibbs_marginals",
    "accept_targets",
    "mean_kl",
    "ACCEPT_MAE",
    "DEFAULT_SWEEPS",
    "DEFAULT_BURN_IN",
]

ACCEPT_MAE = 0.02
EXACT_MAX_NODES = 20
KL_EPS = 1e-7

# Gibbs budgets are validated only by the acceptance rule; keyed by a node
# count ceiling.
DEFAULT_SWEEPS = {36: 20000, 100: 100000}
DEFAULT_BURN_IN = {36: 1000, 100: 10000}
DEFAULT_TEMPS = 6


@dataclass
class IsingModel:
    graph: Graph
    b: np.ndarray  # (n,) biases
    J: np.ndarray  # (|E|,) couplings, aligned with sorted(graph.edges)

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=np.float64)
        self.J = np.asarray(self.J, dtype=np.float64)
        if self.b.shape != (self.graph.n,):
            raise ValueError("bias vector length mismatch")
        if self.J.shape != (self.graph.num_edges,):
            raise ValueError("coupling vector length mismatch")
        if not (np.isfinite(self.b).all() and np.isfinite(self.J).all()):
            raise ValueError("non-finite parameters")

    def edge_list(self):
        return sorted(self.graph.edges)


def sample_model(g: Graph, seed: int) -> IsingModel:
    """Biases and couplings drawn i.i.d. from N(0, 1)."""
    rng = np.random.default_rng(seed)
    return IsingModel(
        graph=g,
        b=rng.standard_normal(g.n),
        J=rng.standard_normal(g.num_edges),
    )


def exact_marginals(m: IsingModel) -> np.ndarray:
    """p(x_i = +1) by enumeration of all 2^n spin states (n <= 20)."""
    n = m.graph.n
    if n > EXACT_MAX_NODES:
        raise ValueError(f"exact enumeration budget is n <= {EXACT_MAX_NODES}")
    # states as +-1 rows, shape (2^n, n)
    codes = np.arange(2**n, dtype=np.uint32)
    bits = ((codes[:, None] >> np.arange(n)[None, :]) & 1).astype(np.float64)
    states = 2.0 * bits - 1.0
    log_w = states @ m.b
    edges = m.edge_list()
    for (i, j), Jij in zip(edges, m.J):
        log_w += Jij * states[:, i] * states[:, j]
    log_w -= log_w.max()  # stabilize
    w = np.exp(log_w)
    Z = w.sum()
    p = (w[:, None] * (states > 0)).sum(axis=0) / Z
    return p


def gibbs_marginals(
    m: IsingModel, sweeps: int, burn_in: int, seed: int, temps: int = DEFAULT_TEMPS
) -> np.ndarray:
    """Sequential-scan Gibbs estimate of p(x_i = +1).

    Conditional: p(x_i=+1 | rest) = sigmoid(2 * (b_i + sum_j J_ij x_j)).
    Marginals are post-burn-in empirical frequencies of +1 in the unit
    temperature chain. With temps > 1 a replica-exchange ladder of hotter
    chains (same sequential-scan kernel at inverse temperature beta, with
    Metropolis swaps between neighbors each sweep) is run alongside; strongly
    coupled models are multimodal and a single chain can lock into one mode.
    """
    if not sweeps > burn_in >= 0:
        raise ValueError("need sweeps > burn_in >= 0")
    if temps < 1:
        raise ValueError("temps must be >= 1")
    n = m.graph.n
    rng = np.random.default_rng(seed)
    nbr = [[] for _ in range(n)]
    for (i, j), Jij in zip(m.edge_list(), m.J):
        nbr[i].append((j, float(Jij)))
        nbr[j].append((i, float(Jij)))
    b = m.b.tolist()
    # ladder of inverse temperatures ending at 1 (index temps-1)
    betas = [(t + 1) / temps for t in range(temps)]

    def log_weight(x):
        lw = sum(b[i] * x[i] for i in range(n))
        for (i, j), Jij in zip(m.edge_list(), m.J):
            lw += Jij * x[i] * x[j]
        return lw

    xs = [
        np.where(rng.random(n) < 0.5, -1.0, 1.0).tolist() for _ in range(temps)
    ]
    counts = [0] * n
    u = rng.random((sweeps, temps, n))  # pre-drawn uniforms per site update
    usw = rng.random((sweeps, temps))  # swap-acceptance uniforms
    exp = math.exp
    for s in range(sweeps):
        for t in range(temps):
            beta = betas[t]
            x = xs[t]
            us = u[s, t]
            for i in range(n):
                field = b[i]
                for j, Jij in nbr[i]:
                    field += Jij * x[j]
                p = 1.0 / (1.0 + exp(-2.0 * beta * field))
                x[i] = 1.0 if us[i] < p else -1.0
        # alternating even/odd neighbor swaps
        for t in range(s % 2, temps - 1, 2):
            dl = log_weight(xs[t + 1]) - log_weight(xs[t])
            if usw[s, t] < exp(min(0.0, (betas[t] - betas[t + 1]) * dl)):
                xs[t], xs[t + 1] = xs[t + 1], xs[t]
        if s >= burn_in:
            cold = xs[temps - 1]
            for i in range(n):
                if cold[i] > 0:
                    counts[i] += 1
    kept = sweeps - burn_in
    return np.array(counts, dtype=np.float64) / kept


def accept_targets(a: np.ndarray, b: np.ndarray) -> bool:
    """True iff mean absolute error between the marginal vectors <= 0.02."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("marginal length mismatch")
    return float(np.abs(a - b).mean()) <= ACCEPT_MAE


def mean_kl(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean over nodes of KL(target || pred) for Bernoulli marginals."""
    p = np.clip(np.asarray(pred, dtype=np.float64), KL_EPS, 1 - KL_EPS)
    t = np.clip(np.asarray(target, dtype=np.float64), KL_EPS, 1 - KL_EPS)
    kl = t * np.log(t / p) + (1 - t) * np.log((1 - t) / (1 - p))
    return float(kl.mean())


# ---------------------------------------------------------------------------
# Target files:
#   marginals CSV:  graph_id,feature_seed,node,b,p_plus
#   couplings CSV:  graph_id,feature_seed,i,j,J
# ---------------------------------------------------------------------------

def write_ising_targets(path_marginals, path_couplings, rows):
    """rows: iterable of (graph_id, feature_seed, IsingModel, marginals)."""
    with open(path_marginals, "w") as fm, open(path_couplings, "w") as fc:
        fm.write("graph_id,feature_seed,node,b,p_plus\n")
        fc.write("graph_id,feature_seed,i,j,J\n")
        for gid, fs, model, marg in rows:
            for i in range(model.graph.n):
                fm.write(f"{gid},{fs},{i},{float(model.b[i])!r},{float(marg[i])!r}\n")
            for (i, j), Jij in zip(model.edge_list(), model.J):
                fc.write(f"{gid},{fs},{i},{j},{float(Jij)!r}\n")


def read_ising_targets(path_marginals, path_couplings):
    """Returns dict (graph_id, feature_seed) -> (b, p_plus, [(i, j, J)])."""
    data = {}
    with open(path_marginals) as f:
        header = f.readline().strip()
        if header != "graph_id,feature_seed,node,b,p_plus":
            raise ValueError(f"{path_marginals}: unexpected header")
        for line in f:
            gid, fs, node, b, p = line.strip().split(",")
            key = (gid, int(fs))
            data.setdefault(key, ([], [], []))
            data[key][0].append((int(node), float(b)))
            data[key][1].append((int(node), float(p)))
    with open(path_couplings) as f:
        header = f.readline().strip()
        if header != "graph_id,feature_seed,i,j,J":
            raise ValueError(f"{path_couplings}: unexpected header")
        for line in f:
            gid, fs, i, j, J = line.strip().split(",")
            key = (gid, int(fs))
            if key not in data:
                raise ValueError(f"coupling for unknown target {key}")
            data[key][2].append((int(i), int(j), float(J)))
    out = {}
    for key, (bs, ps, js) in data.items():
        bs.sort()
        ps.sort()
        out[key] = (
            np.array([v for _, v in bs]),
            np.array([v for _, v in ps]),
            js,
        )
    return out
