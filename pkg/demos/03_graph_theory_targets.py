"""Multi-task graph-theory targets on a single graph.

Node-level: single-source shortest paths, eccentricity, Laplacian features.
Graph-level: diameter, spectral radius, connectivity.
"""

from graphood import GenParams, generate
from graphood.graph_tasks import (
    diameter,
    eccentricity_all,
    is_connected,
    make_features,
    multitask_target,
    spectral_radius,
    sssp,
)


def main():
    g = generate(GenParams(n=12, k=4.0, p=0.3, seed=7))
    print(f"graph: n={g.n}, edges={g.num_edges}")
    print(f"connected: {is_connected(g)}")
    print(f"diameter: {diameter(g)}")
    print(f"spectral radius: {spectral_radius(g):.4f}")
    print(f"sssp from node 0: {sssp(g, 0).tolist()}")
    print(f"eccentricities: {eccentricity_all(g).tolist()}")

    feats = make_features(g, seed=0)
    target = multitask_target(g, feats)
    source = int(feats.source_onehot.argmax())
    print(f"\ntask source node: {source}")
    print(f"target sssp: {target.sssp.tolist()}")
    print(f"target lapfeat[:4]: {[round(float(v), 3) for v in target.lapfeat[:4]]}")
    print(
        f"graph-level: diameter={target.diameter}, "
        f"specrad={target.spectral_radius:.4f}, connected={target.connected}"
    )


if __name__ == "__main__":
    main()
