"""Relaxed Watts-Strogatz graph generation, structural measures, and
isomorphism filtering.

The generator fixes the edge count to floor(n*k/2) for a real-valued target
average degree k, builds a ring lattice, tops it up to the exact edge count,
and then rewires every edge independently with probability p.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Graph",
    "GenParams",
    "GraphMeasures",
    "generate",
    "measures",
    "iso_key",
    "bfs_distances",
    "triangle_count",
    "write_corpus",
    "read_corpus",
    "write_measures",
    "read_measures",
]


class ParameterError(ValueError):
    """Raised when generator parameters violate their bounds."""


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on nodes 0..n-1."""

    n: int
    edges: frozenset  # frozenset of (i, j) tuples with i < j
    adjacency: tuple = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError("node count must be positive")
        for (i, j) in self.edges:
            if not (0 <= i < j < self.n):
                raise ValueError(f"bad edge ({i}, {j}) for n={self.n}")
        if self.adjacency is None:
            adj = [[] for _ in range(self.n)]
            for (i, j) in self.edges:
                adj[i].append(j)
                adj[j].append(i)
            object.__setattr__(
                self, "adjacency", tuple(tuple(sorted(a)) for a in adj)
            )

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.adjacency], dtype=np.int64)

    def directed_edges(self) -> np.ndarray:
        """Both orientations of every edge, sorted by (dst, src).

        Returns an array of shape (2E, 2) with columns (src, dst).
        """
        if not self.edges:
            return np.zeros((0, 2), dtype=np.int64)
        arcs = []
        for (i, j) in self.edges:
            arcs.append((i, j))
            arcs.append((j, i))
        arcs.sort(key=lambda e: (e[1], e[0]))
        return np.array(arcs, dtype=np.int64)


def make_graph(n: int, edges) -> Graph:
    """Build a Graph from any iterable of unordered pairs."""
    norm = frozenset((min(i, j), max(i, j)) for (i, j) in edges)
    return Graph(n=n, edges=norm)


@dataclass(frozen=True)
class GenParams:
    n: int
    k: float
    p: float
    seed: int

    def validate(self):
        if self.n < 3:
            raise ParameterError("n must be at least 3")
        # upper bound n-1 admits the complete graph (k = n-1)
        if not (2.0 <= self.k <= self.n - 1):
            raise ParameterError(f"k={self.k} outside [2, n-1]")
        if not (0.0 <= self.p <= 1.0):
            raise ParameterError(f"p={self.p} outside [0, 1]")


@dataclass(frozen=True)
class GraphMeasures:
    avg_path_length: float
    clustering: float
    deg_avg: float
    deg_max: float
    deg_min: float
    deg_std: float
    connected: bool = True

    def vector(self) -> np.ndarray:
        return np.array(
            [
                self.avg_path_length,
                self.clustering,
                self.deg_avg,
                self.deg_max,
                self.deg_min,
                self.deg_std,
            ],
            dtype=np.float64,
        )


def _ring_distance(n: int, a: int, b: int) -> int:
    d = abs(a - b)
    return min(d, n - d)


def generate(params: GenParams) -> Graph:
    """Generate a relaxed Watts-Strogatz graph with exactly floor(n*k/2) edges.

    Construction: ring lattice connecting each node to its floor(e/n)
    subsequent neighbors; then e mod n distinct nodes each gain one edge to
    their nearest unconnected neighbor (ring distance, forward tie-break);
    finally every edge is rewired with probability p, keeping the lower-id
    endpoint and resampling the other uniformly among valid targets.
    """
    params.validate()
    n = params.n
    e = int(np.floor(n * params.k / 2.0))
    rng = np.random.default_rng(params.seed)

    neighbors = [set() for _ in range(n)]
    edges = set()

    def add_edge(a, b):
        edges.add((min(a, b), max(a, b)))
        neighbors[a].add(b)
        neighbors[b].add(a)

    base = e // n
    for i in range(n):
        for step in range(1, base + 1):
            add_edge(i, (i + step) % n)

    # Top up to exactly e edges: pick distinct nodes that still have an
    # unconnected neighbor, each connects to its nearest one.
    extra = e - len(edges)
    chosen = set()
    for _ in range(extra):
        candidates = [
            v
            for v in range(n)
            if v not in chosen and len(neighbors[v]) < n - 1
        ]
        if not candidates:  # only saturated or already-chosen nodes left
            candidates = [v for v in range(n) if len(neighbors[v]) < n - 1]
        v = int(candidates[rng.integers(len(candidates))])
        chosen.add(v)
        best = None
        best_d = None
        for u in range(n):
            if u == v or u in neighbors[v]:
                continue
            d = _ring_distance(n, v, u)
            # forward neighbor wins ties
            fwd = (u - v) % n
            key = (d, fwd)
            if best is None or key < best_d:
                best, best_d = u, key
        add_edge(v, best)

    if params.p > 0:
        for (i, j) in sorted(edges):
            if (i, j) not in edges:
                continue  # endpoint may have been rewired away already
            if rng.random() >= params.p:
                continue
            keep = i  # lower id retained
            if len(neighbors[keep]) >= n - 1:
                continue  # saturated node: nothing valid to rewire to
            edges.discard((i, j))
            neighbors[i].discard(j)
            neighbors[j].discard(i)
            while True:
                t = int(rng.integers(n))
                if t != keep and t not in neighbors[keep]:
                    break
            add_edge(keep, t)

    assert len(edges) == e
    return Graph(n=n, edges=frozenset(edges))


def bfs_distances(g: Graph, source: int) -> np.ndarray:
    """BFS distances from source; unreachable nodes get -1."""
    dist = np.full(g.n, -1, dtype=np.int64)
    dist[source] = 0
    frontier = [source]
    while frontier:
        nxt = []
        for v in frontier:
            for u in g.adjacency[v]:
                if dist[u] < 0:
                    dist[u] = dist[v] + 1
                    nxt.append(u)
        frontier = nxt
    return dist


def triangle_count(g: Graph) -> int:
    adj = [set(a) for a in g.adjacency]
    t = 0
    for (i, j) in g.edges:
        t += len(adj[i] & adj[j])
    return t // 3


def measures(g: Graph) -> GraphMeasures:
    """Six structural measures of a graph.

    Average path length is taken over ordered reachable pairs only; a
    disconnected graph is flagged via `connected=False`. Clustering is the
    mean local clustering coefficient with degree<2 nodes contributing 0.
    """
    if g.n < 2:
        raise ValueError("measures need n >= 2")
    deg = g.degrees().astype(np.float64)

    total = 0
    pairs = 0
    connected = True
    for v in range(g.n):
        dist = bfs_distances(g, v)
        reach = dist > 0
        if (dist < 0).any():
            connected = False
        total += int(dist[reach].sum())
        pairs += int(reach.sum())
    apl = total / pairs if pairs else 0.0

    adj = [set(a) for a in g.adjacency]
    local = 0.0
    for v in range(g.n):
        d = len(adj[v])
        if d < 2:
            continue
        links = 0
        nbrs = g.adjacency[v]
        for a in range(d):
            for b in range(a + 1, d):
                if nbrs[b] in adj[nbrs[a]]:
                    links += 1
        local += 2.0 * links / (d * (d - 1))
    clustering = local / g.n

    return GraphMeasures(
        avg_path_length=float(apl),
        clustering=float(clustering),
        deg_avg=float(deg.mean()),
        deg_max=float(deg.max()),
        deg_min=float(deg.min()),
        deg_std=float(deg.std()),
        connected=connected,
    )


def _wl_colors(g: Graph, iters: int) -> list:
    """Weisfeiler-Lehman color strings after `iters` refinement rounds."""
    colors = [str(len(a)) for a in g.adjacency]
    for _ in range(iters):
        new = []
        for v in range(g.n):
            sig = colors[v] + "|" + ",".join(
                sorted(colors[u] for u in g.adjacency[v])
            )
            new.append(
                hashlib.blake2b(sig.encode(), digest_size=16).hexdigest()
            )
        colors = new
    return colors


def iso_key(g: Graph, wl_iters: int = 3) -> bytes:
    """64-byte canonical key; isomorphic graphs map to equal keys.

    Combines node/edge counts, the sorted degree sequence, the triangle
    count, and a multiset digest of WL colors. Non-isomorphic regular graphs
    may rarely collide (conservative filter).
    """
    if wl_iters < 1:
        raise ValueError("wl_iters must be >= 1")
    h = hashlib.blake2b(digest_size=64)
    h.update(f"n={g.n};e={g.num_edges};".encode())
    h.update(("deg=" + ",".join(map(str, sorted(g.degrees().tolist())))).encode())
    h.update(f";tri={triangle_count(g)};wl=".encode())
    for c in sorted(_wl_colors(g, wl_iters)):
        h.update(c.encode())
    return h.digest()


# ---------------------------------------------------------------------------
# Corpus files: one graph per line,
#   id <tab> n <tab> k <tab> p <tab> seed <tab> "i:j i:j ..."
# ---------------------------------------------------------------------------

def write_corpus(path, records):
    """records: iterable of (id, GenParams, Graph)."""
    with open(path, "w") as f:
        for gid, params, g in records:
            edge_str = " ".join(f"{i}:{j}" for (i, j) in sorted(g.edges))
            f.write(
                f"{gid}\t{params.n}\t{params.k!r}\t{params.p!r}"
                f"\t{params.seed}\t{edge_str}\n"
            )


def read_corpus(path):
    """Yields (id, GenParams, Graph) tuples."""
    out = []
    with open(path) as f:
        for ln, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 6:
                raise ValueError(f"{path}:{ln}: expected 6 fields")
            gid, n, k, p, seed, edge_str = parts
            n = int(n)
            edges = []
            if edge_str:
                for tok in edge_str.split(" "):
                    i, j = tok.split(":")
                    edges.append((int(i), int(j)))
            out.append(
                (
                    gid,
                    GenParams(n=n, k=float(k), p=float(p), seed=int(seed)),
                    make_graph(n, edges),
                )
            )
    return out


def write_measures(path, rows):
    """rows: iterable of (id, GraphMeasures)."""
    with open(path, "w") as f:
        f.write("id,apl,clust,davg,dmax,dmin,dstd,connected\n")
        for gid, m in rows:
            f.write(
                f"{gid},{m.avg_path_length!r},{m.clustering!r},{m.deg_avg!r},"
                f"{m.deg_max!r},{m.deg_min!r},{m.deg_std!r},"
                f"{int(m.connected)}\n"
            )


def read_measures(path):
    out = []
    with open(path) as f:
        header = f.readline().strip()
        if header != "id,apl,clust,davg,dmax,dmin,dstd,connected":
            raise ValueError(f"{path}: unexpected header {header!r}")
        for line in f:
            parts = line.strip().split(",")
            gid = parts[0]
            vals = [float(x) for x in parts[1:7]]
            out.append(
                (
                    gid,
                    GraphMeasures(
                        avg_path_length=vals[0],
                        clustering=vals[1],
                        deg_avg=vals[2],
                        deg_max=vals[3],
                        deg_min=vals[4],
                        deg_std=vals[5],
                        connected=bool(int(parts[7])),
                    ),
                )
            )
    return out
