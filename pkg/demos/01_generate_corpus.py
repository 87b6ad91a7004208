"""Generate a small graph corpus and look at its structural embedding.

Graphs come from a relaxed Watts-Strogatz process: a ring lattice with
exactly floor(n * k / 2) edges, then per-edge rewiring with probability p.
Sweeping (k, p) traces out a two-dimensional family whose structure we
summarize with six classical measures and a PCA embedding.
"""

import numpy as np

from graphood import GenParams, generate, measures
from graphood.embedding import fit_pca, project


def main():
    n = 16
    records = []
    for k in np.linspace(2, 14, 7):
        for p in (0.0, 0.2, 0.6, 1.0):
            g = generate(GenParams(n=n, k=float(k), p=float(p), seed=0))
            records.append(((k, p), g, measures(g)))

    print(f"{len(records)} graphs on {n} nodes")
    print("k     p    edges  deg_avg  clustering  path_len")
    for (k, p), g, m in records[:8]:
        print(
            f"{k:4.1f} {p:4.1f}  {g.num_edges:5d}  {m.deg_avg:7.3f}"
            f"  {m.clustering:10.3f}  {m.avg_path_length:8.3f}"
        )

    X = np.stack([m.vector() for _, _, m in records])
    pca = fit_pca(X)
    pts = project(pca, X)
    ev = pca.explained_variance
    print(f"\nPCA explained variance: PC1 {ev[0]:.3f}, PC2 {ev[1]:.3f}")
    print(f"PC1 range [{pts[:, 0].min():.2f}, {pts[:, 0].max():.2f}]")
    print(f"PC2 range [{pts[:, 1].min():.2f}, {pts[:, 1].max():.2f}]")


if __name__ == "__main__":
    main()
