"""2D embedding of graph measures and train/test splitting.

Measures are z-scored, projected onto the top-2 principal directions of
their covariance, and training groups are carved as half-unit-radius circles
around configurable centers. The test split takes one graph per occupied
cell of a uniform grid over the embedded bounding box.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PcaModel",
    "SplitSpec",
    "fit_pca",
    "project",
    "select_groups",
    "subsample_test",
    "degree_histogram",
    "default_centers",
    "write_split",
    "read_split",
]


@dataclass
class PcaModel:
    mean: np.ndarray
    scale: np.ndarray
    components: np.ndarray  # (2, 6), orthonormal rows
    explained_variance: np.ndarray
    degenerate_features: tuple = ()


@dataclass
class SplitSpec:
    centers: list
    radius: float = 0.5
    test_bins: tuple = (250, 250)
    group_size: int = 1000

    def validate(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if min(self.test_bins) < 1:
            raise ValueError("test bins must be >= 1")


def fit_pca(matrix: np.ndarray, n_components: int = 2) -> PcaModel:
    """Fit a PCA on z-scored columns of an (N, 6) measures matrix.

    Sign convention: the first nonzero entry of each component is positive.
    Constant columns get scale 1 and are reported in `degenerate_features`.
    """
    X = np.asarray(matrix, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 3:
        raise ValueError("need at least 3 samples")
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    degenerate = tuple(int(i) for i in np.flatnonzero(scale < 1e-12))
    scale = np.where(scale < 1e-12, 1.0, scale)
    Z = (X - mean) / scale
    cov = np.cov(Z, rowvar=False, ddof=1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:n_components]
    comps = evecs[:, order].T.copy()
    for r in range(comps.shape[0]):
        nz = np.flatnonzero(np.abs(comps[r]) > 1e-12)
        if nz.size and comps[r, nz[0]] < 0:
            comps[r] = -comps[r]
    return PcaModel(
        mean=mean,
        scale=scale,
        components=comps,
        explained_variance=evals[order].copy(),
        degenerate_features=degenerate,
    )


def project(model: PcaModel, m) -> np.ndarray:
    """Project measures (6-vector, GraphMeasures, or (N, 6) matrix) to 2D."""
    v = m.vector() if hasattr(m, "vector") else np.asarray(m, dtype=np.float64)
    return ((v - model.mean) / model.scale) @ model.components.T


def default_centers(points: np.ndarray, count: int = 5) -> list:
    """Evenly spaced centers along the PC1 span at the PC2 median."""
    pts = np.asarray(points)
    lo, hi = pts[:, 0].min(), pts[:, 0].max()
    xs = np.linspace(lo, hi, count + 2)[1:-1]
    y = float(np.median(pts[:, 1]))
    return [(float(x), y) for x in xs]


def select_groups(points, spec: SplitSpec, keys, seed: int = 0):
    """Carve training groups as circles around spec.centers.

    points: (N, 2) array aligned with keys (iso keys, for dedup).
    Returns a list of groups; each group is a list of (index, feature_seed)
    pairs. Oversized groups are subsampled; undersized groups are padded by
    reusing member graphs with fresh feature seeds.
    """
    spec.validate()
    pts = np.asarray(points, dtype=np.float64)
    rng = np.random.default_rng(seed)
    groups = []
    for ci, center in enumerate(spec.centers):
        c = np.asarray(center, dtype=np.float64)
        d = np.linalg.norm(pts - c, axis=1)
        inside = np.flatnonzero(d <= spec.radius)  # closed boundary
        if inside.size == 0:
            raise ValueError(f"no samples within radius of center {center}")
        seen = set()
        members = []
        for idx in inside:
            k = keys[idx]
            if k in seen:
                continue
            seen.add(k)
            members.append(int(idx))
        if len(members) > spec.group_size:
            pick = rng.choice(len(members), size=spec.group_size, replace=False)
            members = [members[i] for i in sorted(pick)]
        out = [(m, int(rng.integers(2**31))) for m in members]
        while len(out) < spec.group_size:
            m = members[int(rng.integers(len(members)))]
            out.append((m, int(rng.integers(2**31))))
        groups.append(out)
    return groups


def subsample_test(points, bins, seed: int = 0):
    """One seeded-uniform pick per occupied cell of a uniform 2D grid."""
    pts = np.asarray(points, dtype=np.float64)
    rows, cols = bins
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    span = np.where(hi - lo < 1e-12, 1.0, hi - lo)
    cx = np.clip(((pts[:, 0] - lo[0]) / span[0] * cols).astype(int), 0, cols - 1)
    cy = np.clip(((pts[:, 1] - lo[1]) / span[1] * rows).astype(int), 0, rows - 1)
    cell = cy * cols + cx
    rng = np.random.default_rng(seed)
    chosen = []
    for c in np.unique(cell):
        idxs = np.flatnonzero(cell == c)
        chosen.append(int(idxs[rng.integers(idxs.size)]))
    return sorted(chosen)


def degree_histogram(graphs, bin_width: float = 1.0):
    """Normalized histogram of node degrees pooled over all graphs.

    Returns (bin_edges, masses) with masses summing to 1.
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    if not graphs:
        raise ValueError("empty graph list")
    degs = np.concatenate([g.degrees() for g in graphs]).astype(np.float64)
    top = degs.max()
    nbins = max(1, int(np.ceil((top + 1e-9) / bin_width)))
    edges = np.arange(nbins + 1) * bin_width
    idx = np.clip((degs / bin_width).astype(int), 0, nbins - 1)
    counts = np.bincount(idx, minlength=nbins).astype(np.float64)
    return edges, counts / counts.sum()


# ---------------------------------------------------------------------------
# Split file: CSV  group,id,pc1,pc2,feature_seed
# (training groups are named g1..gK; the test split uses group "test")
# ---------------------------------------------------------------------------

def write_split(path, rows):
    """rows: iterable of (group, id, pc1, pc2, feature_seed)."""
    with open(path, "w") as f:
        f.write("group,id,pc1,pc2,feature_seed\n")
        for group, gid, pc1, pc2, fs in rows:
            f.write(f"{group},{gid},{float(pc1)!r},{float(pc2)!r},{fs}\n")


def read_split(path):
    out = []
    with open(path) as f:
        header = f.readline().strip()
        if header != "group,id,pc1,pc2,feature_seed":
            raise ValueError(f"{path}: unexpected header {header!r}")
        for line in f:
            group, gid, pc1, pc2, fs = line.strip().split(",")
            out.append((group, gid, float(pc1), float(pc2), int(fs)))
    return out
