import numpy as np
import pytest

from graphood import graphs
from graphood.graphs import (
    GenParams,
    Graph,
    bfs_distances,
    generate,
    iso_key,
    make_graph,
    measures,
    read_corpus,
    read_measures,
    triangle_count,
    write_corpus,
    write_measures,
)
from graphood.graphs import ParameterError

from oracles import brute_measures, brute_triangles, floyd_warshall


def cycle(n):
    return make_graph(n, [(i, (i + 1) % n) for i in range(n)])


def complete(n):
    return make_graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


# ---------------------------------------------------------------------------
# Graph basics
# ---------------------------------------------------------------------------


def test_graph_rejects_bad_edges():
    with pytest.raises(ValueError):
        Graph(n=3, edges=frozenset({(0, 3)}))
    with pytest.raises(ValueError):
        Graph(n=3, edges=frozenset({(2, 1)}))  # must be ordered i < j
    with pytest.raises(ValueError):
        Graph(n=0, edges=frozenset())


def test_make_graph_normalizes_orientation():
    g = make_graph(4, [(2, 0), (1, 3), (3, 1)])
    assert g.edges == frozenset({(0, 2), (1, 3)})
    assert g.num_edges == 2


def test_degrees_and_adjacency():
    g = make_graph(4, [(0, 1), (0, 2), (0, 3)])
    assert g.degrees().tolist() == [3, 1, 1, 1]
    assert g.adjacency[0] == (1, 2, 3)
    assert g.adjacency[2] == (0,)


def test_directed_edges_sorted_by_destination():
    g = make_graph(3, [(0, 1), (1, 2)])
    arcs = g.directed_edges()
    assert arcs.shape == (4, 2)
    # sorted by (dst, src)
    assert arcs.tolist() == [[1, 0], [0, 1], [2, 1], [1, 2]]


# ---------------------------------------------------------------------------
# Generator
# ---------------------------------------------------------------------------


def test_genparams_validation():
    GenParams(n=3, k=2, p=0.0, seed=0).validate()
    GenParams(n=16, k=15, p=1.0, seed=0).validate()  # complete graph allowed
    with pytest.raises(ParameterError):
        GenParams(n=2, k=2, p=0.0, seed=0).validate()
    with pytest.raises(ParameterError):
        GenParams(n=10, k=1.5, p=0.0, seed=0).validate()
    with pytest.raises(ParameterError):
        GenParams(n=10, k=10, p=0.0, seed=0).validate()
    with pytest.raises(ParameterError):
        GenParams(n=10, k=4, p=1.1, seed=0).validate()


def test_generate_edge_count_contract():
    rng = np.random.default_rng(7)
    for _ in range(200):
        n = int(rng.integers(3, 25))
        k = float(rng.uniform(2.0, n - 1))
        p = float(rng.uniform(0.0, 1.0))
        g = generate(GenParams(n=n, k=k, p=p, seed=int(rng.integers(1 << 30))))
        assert g.num_edges == int(np.floor(n * k / 2.0))
        for (i, j) in g.edges:
            assert 0 <= i < j < n  # simple: no loops, i < j ensures no dups


def test_generate_p_zero_even_k_is_ring_lattice():
    g = generate(GenParams(n=12, k=4, p=0.0, seed=3))
    want = set()
    for i in range(12):
        want.add(tuple(sorted((i, (i + 1) % 12))))
        want.add(tuple(sorted((i, (i + 2) % 12))))
    assert g.edges == frozenset(want)


def test_generate_cycle_and_complete_examples():
    c = generate(GenParams(n=100, k=2, p=0.0, seed=0))
    assert c.num_edges == 100
    assert np.all(c.degrees() == 2)
    assert bool((bfs_distances(c, 0) >= 0).all())

    k16 = generate(GenParams(n=16, k=15, p=0.0, seed=0))
    assert k16.num_edges == 120
    assert k16.edges == complete(16).edges


def test_generate_fractional_k_edge_count():
    # odd leftover edges come from the nearest-neighbor top-up
    g = generate(GenParams(n=16, k=5.0, p=0.0, seed=1))
    assert g.num_edges == 40
    degs = sorted(g.degrees().tolist())
    assert degs[0] >= 4  # base lattice alone gives everyone 2*floor(e/n)


def test_generate_deterministic():
    p = GenParams(n=20, k=6.3, p=0.4, seed=99)
    assert generate(p).edges == generate(p).edges


def test_generate_rewiring_changes_lattice():
    a = generate(GenParams(n=30, k=4, p=0.0, seed=5))
    b = generate(GenParams(n=30, k=4, p=1.0, seed=5))
    assert a.num_edges == b.num_edges == 60
    assert a.edges != b.edges


# ---------------------------------------------------------------------------
# Distances, triangles, measures
# ---------------------------------------------------------------------------


def test_bfs_matches_floyd_warshall():
    rng = np.random.default_rng(11)
    for _ in range(25):
        n = int(rng.integers(3, 15))
        k = float(rng.uniform(2.0, n - 1))
        g = generate(
            GenParams(n=n, k=k, p=float(rng.uniform()), seed=int(rng.integers(1000)))
        )
        fw = floyd_warshall(g)
        for src in range(n):
            d = bfs_distances(g, src)
            want = np.where(np.isfinite(fw[src]), fw[src], -1)
            assert np.array_equal(d.astype(float), want)


def test_bfs_disconnected_marks_unreachable():
    g = make_graph(5, [(0, 1), (2, 3)])
    assert bfs_distances(g, 0).tolist() == [0, 1, -1, -1, -1]


def test_triangle_count_examples_and_oracle():
    assert triangle_count(complete(4)) == 4
    assert triangle_count(cycle(5)) == 0
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = int(rng.integers(4, 12))
        g = generate(
            GenParams(n=n, k=float(rng.uniform(2, n - 1)), p=0.5, seed=int(rng.integers(1000)))
        )
        assert triangle_count(g) == brute_triangles(g)


def test_measures_against_brute_force():
    rng = np.random.default_rng(21)
    for _ in range(30):
        n = int(rng.integers(3, 16))
        g = generate(
            GenParams(
                n=n,
                k=float(rng.uniform(2, n - 1)),
                p=float(rng.uniform()),
                seed=int(rng.integers(10000)),
            )
        )
        m = measures(g)
        vec, connected = brute_measures(g)
        assert np.allclose(m.vector(), vec, atol=1e-10, rtol=0)
        assert m.connected == connected


def test_measures_path_graph_closed_form():
    # P3: ordered reachable pairs 0-1:1 0-2:2 1-2:1 twice -> mean 8/6
    g = make_graph(3, [(0, 1), (1, 2)])
    m = measures(g)
    assert m.avg_path_length == pytest.approx(8.0 / 6.0)
    assert m.clustering == 0.0
    assert m.deg_max == 2 and m.deg_min == 1


def test_measures_low_degree_nodes_contribute_zero_clustering():
    # triangle plus a pendant: three nodes at 1.0, pendant at 0
    g = make_graph(4, [(0, 1), (0, 2), (1, 2), (2, 3)])
    m = measures(g)
    assert m.clustering == pytest.approx((1.0 + 1.0 + 1.0 / 3.0 + 0.0) / 4.0)


def test_ws_lattice_clustering_closed_form():
    # k=4 ring lattice: clustering 3(k-2)/(4(k-1)) = 0.5 exactly
    g = generate(GenParams(n=24, k=4, p=0.0, seed=0))
    assert measures(g).clustering == 0.5


# ---------------------------------------------------------------------------
# Isomorphism key
# ---------------------------------------------------------------------------


def relabel(g, perm):
    return make_graph(g.n, [(perm[i], perm[j]) for (i, j) in g.edges])


def test_iso_key_invariant_under_relabeling():
    rng = np.random.default_rng(5)
    for _ in range(15):
        n = int(rng.integers(4, 14))
        g = generate(
            GenParams(n=n, k=float(rng.uniform(2, n - 1)), p=0.5, seed=int(rng.integers(1000)))
        )
        perm = rng.permutation(n).tolist()
        assert iso_key(g) == iso_key(relabel(g, perm))


def test_iso_key_separates_simple_nonisomorphic_pairs():
    assert iso_key(cycle(6)) != iso_key(make_graph(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]))
    assert iso_key(cycle(5)) != iso_key(make_graph(5, [(0, 1), (1, 2), (2, 3), (3, 4)]))
    assert len(iso_key(cycle(5))) == 64


def test_iso_key_rejects_zero_iterations():
    with pytest.raises(ValueError):
        iso_key(cycle(4), wl_iters=0)


# ---------------------------------------------------------------------------
# Files
# ---------------------------------------------------------------------------


def test_corpus_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    records = []
    for gid in range(10):
        params = GenParams(
            n=int(rng.integers(3, 12)),
            k=float(rng.uniform(2, 2.9)),
            p=float(rng.uniform()),
            seed=gid,
        )
        records.append((str(gid), params, generate(params)))
    path = tmp_path / "corpus.tsv"
    write_corpus(path, records)
    back = read_corpus(path)
    assert len(back) == 10
    for (gid, params, g), (gid2, params2, g2) in zip(records, back):
        assert gid == gid2
        assert params == params2
        assert g.edges == g2.edges


def test_measures_round_trip(tmp_path):
    g = generate(GenParams(n=10, k=4, p=0.3, seed=2))
    path = tmp_path / "m.csv"
    write_measures(path, [("0", measures(g))])
    back = read_measures(path)
    assert back[0][0] == "0"
    assert np.array_equal(back[0][1].vector(), measures(g).vector())
    assert back[0][1].connected == measures(g).connected


def test_read_measures_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("nope\n")
    with pytest.raises(ValueError):
        read_measures(path)
