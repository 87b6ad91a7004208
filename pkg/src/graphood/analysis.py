"""Evaluation analyses: 2D loss heatmaps over the embedded graph space,
top-fraction degree histograms, smoothed PC1 loss projections, and the
valley/mode summary report."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding import degree_histogram

__all__ = [
    "EvalResult",
    "EvalGrid",
    "ValleyModeReport",
    "heatmap",
    "top_fraction_histogram",
    "pc1_projection",
    "valley_mode_report",
    "write_grid_csv",
    "write_pgm",
    "read_pgm",
    "write_report",
]

LOG_FLOOR = 1e-8


@dataclass
class EvalResult:
    """Per-graph evaluation record."""

    graph_id: str
    point: tuple  # (pc1, pc2)
    loss: float
    graph: object = None  # Graph, needed for degree histograms


@dataclass
class EvalGrid:
    rows: int
    cols: int
    x_edges: np.ndarray
    y_edges: np.ndarray
    mean_log_loss: np.ndarray  # (rows, cols), nan where empty
    counts: np.ndarray


@dataclass
class ValleyModeReport:
    valley_losses: list  # smoothed log-losses at up to two valleys
    mode_counts: list  # node counts at up to two histogram modes
    valley_positions: list
    mode_positions: list


def _log_loss(losses):
    return np.log(np.maximum(np.asarray(losses, dtype=np.float64), LOG_FLOOR))


def heatmap(results, rows: int = 30, cols: int = 30) -> EvalGrid:
    """Per-cell mean of per-graph log losses on a uniform grid over the
    bounding box of the evaluated points."""
    if not results:
        raise ValueError("no results to grid")
    pts = np.array([r.point for r in results], dtype=np.float64)
    ll = _log_loss([r.loss for r in results])
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    span = np.where(hi - lo < 1e-12, 1.0, hi - lo)
    cx = np.clip(((pts[:, 0] - lo[0]) / span[0] * cols).astype(int), 0, cols - 1)
    cy = np.clip(((pts[:, 1] - lo[1]) / span[1] * rows).astype(int), 0, rows - 1)
    total = np.zeros((rows, cols))
    count = np.zeros((rows, cols))
    np.add.at(total, (cy, cx), ll)
    np.add.at(count, (cy, cx), 1.0)
    with np.errstate(invalid="ignore"):
        mean = np.where(count > 0, total / np.maximum(count, 1), np.nan)
    return EvalGrid(
        rows=rows,
        cols=cols,
        x_edges=np.linspace(lo[0], lo[0] + span[0], cols + 1),
        y_edges=np.linspace(lo[1], lo[1] + span[1], rows + 1),
        mean_log_loss=mean,
        counts=count,
    )


def top_fraction_histogram(results, fraction: float, bin_width: float = 1.0):
    """Degree histogram of the best ceil(fraction*N) graphs by loss.

    Ties at the cutoff break by graph id. Also returns the pooled node count
    per bin (for mode peak sizes)."""
    if not (0 < fraction <= 1):
        raise ValueError("fraction must be in (0, 1]")
    ranked = sorted(results, key=lambda r: (r.loss, r.graph_id))
    k = int(np.ceil(fraction * len(ranked)))
    graphs = [r.graph for r in ranked[:k]]
    if any(g is None for g in graphs):
        raise ValueError("results lack graph references")
    edges, masses = degree_histogram(graphs, bin_width)
    total_nodes = sum(g.n for g in graphs)
    return edges, masses, masses * total_nodes


def pc1_projection(results, bandwidth: float = 0.15, bins: int = 30):
    """Bin per-graph log losses by PC1 and smooth with a Gaussian kernel.

    Returns (centers, smoothed, raw, valleys) where valleys are the indices
    of strict local minima of the smoothed curve."""
    if not results:
        raise ValueError("no results to project")
    x = np.array([r.point[0] for r in results], dtype=np.float64)
    ll = _log_loss([r.loss for r in results])
    lo, hi = x.min(), x.max()
    span = hi - lo if hi - lo > 1e-12 else 1.0
    idx = np.clip(((x - lo) / span * bins).astype(int), 0, bins - 1)
    total = np.bincount(idx, weights=ll, minlength=bins)
    count = np.bincount(idx, minlength=bins).astype(np.float64)
    centers = lo + (np.arange(bins) + 0.5) * span / bins
    with np.errstate(invalid="ignore"):
        raw = np.where(count > 0, total / np.maximum(count, 1), np.nan)

    occupied = count > 0
    if bandwidth <= 0:
        smoothed = raw.copy()
    else:
        w = np.exp(
            -0.5 * ((centers[:, None] - centers[None, :]) / bandwidth) ** 2
        )
        w = w * (count[None, :])
        num = (w * np.where(occupied, raw, 0.0)[None, :]).sum(axis=1)
        den = (w * occupied[None, :]).sum(axis=1)
        smoothed = np.where(den > 0, num / np.maximum(den, 1e-300), np.nan)

    valleys = find_valleys(smoothed)
    return centers, smoothed, raw, valleys


def find_valleys(curve) -> list:
    """Indices of strict interior local minima, ignoring NaN cells."""
    c = np.asarray(curve, dtype=np.float64)
    idx = np.flatnonzero(np.isfinite(c))
    vals = c[idx]
    out = []
    for k in range(1, len(vals) - 1):
        if vals[k] < vals[k - 1] and vals[k] < vals[k + 1]:
            out.append(int(idx[k]))
    return out


def find_modes(masses) -> list:
    """Indices of local maxima (boundary bins included) of a histogram."""
    m = np.asarray(masses, dtype=np.float64)
    out = []
    for k in range(len(m)):
        left = m[k - 1] if k > 0 else -np.inf
        right = m[k + 1] if k < len(m) - 1 else -np.inf
        if m[k] > left and m[k] >= right and m[k] > 0:
            out.append(k)
    return out


def valley_mode_report(
    results, fraction: float = 0.4, bandwidth: float = 0.15, bins: int = 30
) -> ValleyModeReport:
    """Loss at up to two PC1 valleys plus node counts at up to two modes of
    the top-fraction degree histogram. Missing entries are reported as None.
    """
    centers, smoothed, _, valleys = pc1_projection(
        results, bandwidth=bandwidth, bins=bins
    )
    edges, masses, node_counts = top_fraction_histogram(results, fraction)
    modes = find_modes(masses)

    v_losses = [float(smoothed[v]) for v in valleys[:2]]
    v_pos = [float(centers[v]) for v in valleys[:2]]
    m_counts = [float(node_counts[m]) for m in modes[:2]]
    m_pos = [float((edges[m] + edges[m + 1]) / 2) for m in modes[:2]]
    while len(v_losses) < 2:
        v_losses.append(None)
        v_pos.append(None)
    while len(m_counts) < 2:
        m_counts.append(None)
        m_pos.append(None)
    return ValleyModeReport(
        valley_losses=v_losses,
        mode_counts=m_counts,
        valley_positions=v_pos,
        mode_positions=m_pos,
    )


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------

def write_grid_csv(path, grid: EvalGrid):
    with open(path, "w") as f:
        f.write("row,col,mean_log_loss,count\n")
        for r in range(grid.rows):
            for c in range(grid.cols):
                v = grid.mean_log_loss[r, c]
                vs = "" if not np.isfinite(v) else repr(float(v))
                f.write(f"{r},{c},{vs},{int(grid.counts[r, c])}\n")


def write_pgm(path, grid: EvalGrid):
    """ASCII PGM: min-max scaled over occupied cells; empty cells are 255."""
    occ = np.isfinite(grid.mean_log_loss)
    img = np.full((grid.rows, grid.cols), 255, dtype=int)
    if occ.any():
        vals = grid.mean_log_loss[occ]
        lo, hi = vals.min(), vals.max()
        span = hi - lo if hi - lo > 1e-12 else 1.0
        img[occ] = np.clip(
            ((grid.mean_log_loss[occ] - lo) / span * 254).astype(int), 0, 254
        )
    with open(path, "w") as f:
        f.write(f"P2\n{grid.cols} {grid.rows}\n255\n")
        for r in range(grid.rows):
            f.write(" ".join(str(v) for v in img[r]) + "\n")


def read_pgm(path):
    with open(path) as f:
        tokens = f.read().split()
    if tokens[0] != "P2":
        raise ValueError("not an ASCII PGM")
    cols, rows, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    data = np.array([int(t) for t in tokens[4:]], dtype=int)
    return data.reshape(rows, cols)


def write_report(path, metrics: dict):
    """report.csv: metric,value rows (insertion order preserved)."""
    with open(path, "w") as f:
        f.write("metric,value\n")
        for k, v in metrics.items():
            f.write(f"{k},{'' if v is None else repr(float(v))}\n")
