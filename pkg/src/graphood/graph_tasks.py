"""Graph-theory multi-task targets and input features.

Three node-level targets (shortest-path distance from a source node,
eccentricity, Laplacian feature (D-A)x) and three graph-level targets
(diameter, spectral radius, connectedness). Unreachable quantities are
encoded as -1 and masked in downstream losses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import Graph, bfs_distances

__all__ = [
    "MultiTaskTarget",
    "TaskFeatures",
    "sssp",
    "eccentricity_all",
    "diameter",
    "laplacian_features",
    "spectral_radius",
    "is_connected",
    "make_features",
    "multitask_target",
]


@dataclass
class TaskFeatures:
    source_onehot: np.ndarray  # (n,) 0/1 with exactly one 1
    scalar: np.ndarray  # (n,) U[0,1] draws


@dataclass
class MultiTaskTarget:
    sssp: np.ndarray
    ecc: np.ndarray
    lapfeat: np.ndarray
    diameter: int
    spectral_radius: float
    connected: bool


def sssp(g: Graph, source: int) -> np.ndarray:
    if not (0 <= source < g.n):
        raise ValueError("source out of range")
    return bfs_distances(g, source)


def eccentricity_all(g: Graph) -> np.ndarray:
    """Max BFS distance over reachable nodes; -1 where the graph is
    disconnected (eccentricity is undefined)."""
    ecc = np.empty(g.n, dtype=np.int64)
    disconnected = False
    for v in range(g.n):
        d = bfs_distances(g, v)
        if (d < 0).any():
            disconnected = True
        ecc[v] = d.max()
    if disconnected:
        ecc[:] = -1
    return ecc


def diameter(g: Graph) -> int:
    ecc = eccentricity_all(g)
    return -1 if (ecc < 0).any() else int(ecc.max())


def laplacian_features(g: Graph, x) -> np.ndarray:
    """(D - A) x without forming the dense Laplacian."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (g.n,):
        raise ValueError("feature vector length mismatch")
    deg = g.degrees().astype(np.float64)
    out = deg * x
    for (i, j) in g.edges:
        out[i] -= x[j]
        out[j] -= x[i]
    return out


def spectral_radius(g: Graph, tol: float = 1e-9, max_iter: int = 10000) -> float:
    """Largest adjacency eigenvalue by power iteration.

    Falls back to a dense symmetric eigensolver when the Rayleigh quotient
    oscillates (bipartite +-lambda pairing stalls plain power iteration).
    """
    if g.num_edges == 0:
        return 0.0
    n = g.n
    A = np.zeros((n, n), dtype=np.float64)
    for (i, j) in g.edges:
        A[i, j] = 1.0
        A[j, i] = 1.0
    v = np.full(n, 1.0 / np.sqrt(n))
    prev = None
    for _ in range(max_iter):
        w = A @ v
        norm = np.linalg.norm(w)
        if norm < 1e-300:
            return 0.0
        v = w / norm
        Av = A @ v
        lam = float(v @ Av)
        if prev is not None and abs(lam - prev) < tol:
            resid = float(np.linalg.norm(Av - lam * v))
            if resid < 1e-8:  # symmetric residual bounds the eigenvalue error
                return lam
            # Rayleigh quotient stalled without an eigenpair: period-2
            # bipartite cycle, hand off to a dense solver
            return float(np.linalg.eigvalsh(A).max())
        prev = lam
    raise RuntimeError("power iteration did not converge")


def is_connected(g: Graph) -> bool:
    return bool((bfs_distances(g, 0) >= 0).all())


def make_features(g: Graph, seed: int) -> TaskFeatures:
    """Uniform source node plus per-node U[0,1] scalars."""
    rng = np.random.default_rng(seed)
    onehot = np.zeros(g.n, dtype=np.float64)
    onehot[int(rng.integers(g.n))] = 1.0
    return TaskFeatures(source_onehot=onehot, scalar=rng.random(g.n))


def multitask_target(g: Graph, feats: TaskFeatures) -> MultiTaskTarget:
    src = int(np.argmax(feats.source_onehot))
    return MultiTaskTarget(
        sssp=sssp(g, src),
        ecc=eccentricity_all(g),
        lapfeat=laplacian_features(g, feats.scalar),
        diameter=diameter(g),
        spectral_radius=spectral_radius(g),
        connected=is_connected(g),
    )


# ---------------------------------------------------------------------------
# Target files:
#   node CSV:  graph_id,feature_seed,node,sssp,ecc,lapfeat
#   graph CSV: graph_id,feature_seed,diameter,specrad,connected
# ---------------------------------------------------------------------------

def write_gtheory_targets(path_nodes, path_graphs, rows):
    """rows: iterable of (graph_id, feature_seed, MultiTaskTarget)."""
    with open(path_nodes, "w") as fn, open(path_graphs, "w") as fg:
        fn.write("graph_id,feature_seed,node,sssp,ecc,lapfeat\n")
        fg.write("graph_id,feature_seed,diameter,specrad,connected\n")
        for gid, fs, t in rows:
            for i in range(len(t.sssp)):
                fn.write(
                    f"{gid},{fs},{i},{int(t.sssp[i])},{int(t.ecc[i])},"
                    f"{float(t.lapfeat[i])!r}\n"
                )
            fg.write(
                f"{gid},{fs},{t.diameter},{float(t.spectral_radius)!r},"
                f"{int(t.connected)}\n"
            )


def read_gtheory_targets(path_nodes, path_graphs):
    """Returns dict (graph_id, feature_seed) -> MultiTaskTarget."""
    nodes = {}
    with open(path_nodes) as f:
        header = f.readline().strip()
        if header != "graph_id,feature_seed,node,sssp,ecc,lapfeat":
            raise ValueError(f"{path_nodes}: unexpected header")
        for line in f:
            gid, fs, node, s, e, lf = line.strip().split(",")
            nodes.setdefault((gid, int(fs)), []).append(
                (int(node), int(s), int(e), float(lf))
            )
    out = {}
    with open(path_graphs) as f:
        header = f.readline().strip()
        if header != "graph_id,feature_seed,diameter,specrad,connected":
            raise ValueError(f"{path_graphs}: unexpected header")
        for line in f:
            gid, fs, d, sr, c = line.strip().split(",")
            key = (gid, int(fs))
            rows = sorted(nodes[key])
            out[key] = MultiTaskTarget(
                sssp=np.array([r[1] for r in rows], dtype=np.int64),
                ecc=np.array([r[2] for r in rows], dtype=np.int64),
                lapfeat=np.array([r[3] for r in rows]),
                diameter=int(d),
                spectral_radius=float(sr),
                connected=bool(int(c)),
            )
    return out
