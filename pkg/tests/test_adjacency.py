import itertools

import numpy as np
import pytest

from conesparse.adjacency import (
    AdjacencyGraph, CliqueExplosion, CliqueSet, InfeasibleCertificate,
    NegativeCoefficient, algebraic_adjacency_test, build_adjacency_graph,
    combinatorial_adjacency_test, enumerate_maximal_cliques,
    is_conically_sparse, is_weakly_eps_sparse, representation_uniqueness,
)
from conesparse.geometry import DDPair, FacetCone, VertexCone, facet_to_vertex
from conesparse.shapes import preset

from conftest import (brute_force_maximal_cliques, hexagon_rays,
                      random_proper_cone)


@pytest.fixture(scope="module")
def hexagon_pair(hexagon_cone):
    # explicit vertex matrix keeps ray indices in angle order 0..5
    return DDPair(hexagon_cone, VertexCone(hexagon_rays()))


def six_cycle():
    return AdjacencyGraph(6, frozenset({(i, (i + 1) % 6) for i in range(6)}))


# ---------------------------------------------------------------------------
# graph type


def test_graph_validation():
    with pytest.raises(ValueError):
        AdjacencyGraph(3, frozenset({(1, 1)}))
    with pytest.raises(IndexError):
        AdjacencyGraph(3, frozenset({(0, 5)}))
    g = AdjacencyGraph(3, frozenset({(2, 0)}))
    assert g.has_edge(0, 2) and g.has_edge(2, 0)
    assert g.neighbors(0) == frozenset({2})
    with pytest.raises(IndexError):
        g.neighbors(7)


# ---------------------------------------------------------------------------
# adjacency tests


def test_orthant_pairs_adjacent():
    pair = DDPair(FacetCone(np.eye(3)), VertexCone(np.eye(3)))
    assert algebraic_adjacency_test(pair, 0, 1)
    assert combinatorial_adjacency_test(pair, 0, 1)
    with pytest.raises(ValueError):
        algebraic_adjacency_test(pair, 1, 1)
    with pytest.raises(IndexError):
        algebraic_adjacency_test(pair, 0, 9)


def test_hexagon_adjacency_structure(hexagon_pair):
    for i, j in itertools.combinations(range(6), 2):
        expected = (j - i) % 6 in (1, 5)  # consecutive generators only
        assert algebraic_adjacency_test(hexagon_pair, i, j) == expected
        assert combinatorial_adjacency_test(hexagon_pair, i, j) == expected


def test_two_adjacency_tests_agree_on_random_cones():
    rng = np.random.default_rng(31)
    done = 0
    while done < 20:
        n = int(rng.integers(3, 5))
        a = random_proper_cone(rng, n, int(rng.integers(n, 9)))
        if a is None:
            continue
        done += 1
        vertex = facet_to_vertex(FacetCone(a))
        pair = DDPair(FacetCone(a), vertex)
        for i, j in itertools.combinations(range(vertex.n_rays), 2):
            assert (algebraic_adjacency_test(pair, i, j)
                    == combinatorial_adjacency_test(pair, i, j))


def test_complete_graph_when_square(hexagon_pair):
    rng = np.random.default_rng(33)
    a = rng.standard_normal((4, 4)) + 3 * np.eye(4)
    vertex = facet_to_vertex(FacetCone(a))
    pair = DDPair(FacetCone(a), vertex)
    graph = build_adjacency_graph(pair)
    assert len(graph.edges) == 6  # K4
    cliques = enumerate_maximal_cliques(graph)
    assert cliques.cliques == ((0, 1, 2, 3),)


def test_build_graph_hexagon_cycle(hexagon_pair):
    graph = build_adjacency_graph(hexagon_pair)
    assert graph.edges == six_cycle().edges


# ---------------------------------------------------------------------------
# maximal cliques


def test_cliques_six_cycle():
    cliques = enumerate_maximal_cliques(six_cycle())
    assert len(cliques) == 6
    assert all(len(c) == 2 for c in cliques)


def test_cliques_match_brute_force():
    rng = np.random.default_rng(37)
    for _ in range(30):
        d = int(rng.integers(3, 11))
        edges = {(i, j) for i, j in itertools.combinations(range(d), 2)
                 if rng.random() < 0.45}
        graph = AdjacencyGraph(d, frozenset(edges))
        got = {frozenset(c) for c in enumerate_maximal_cliques(graph)}
        assert got == brute_force_maximal_cliques(d, edges)


def test_clique_cap():
    # complement of a perfect matching on 2k nodes has 2^k maximal cliques
    k = 6
    edges = {(i, j) for i, j in itertools.combinations(range(2 * k), 2)
             if not (i // 2 == j // 2)}
    graph = AdjacencyGraph(2 * k, frozenset(edges))
    with pytest.raises(CliqueExplosion):
        enumerate_maximal_cliques(graph, cap=10)


def test_bell20_clique_structure():
    cone = preset("bell20")
    vertex = facet_to_vertex(cone)
    pair = DDPair(cone, vertex)
    graph = build_adjacency_graph(pair)
    cliques = enumerate_maximal_cliques(graph)
    assert vertex.n_rays == 321
    assert len(graph.edges) == 3072
    assert len(cliques) == 152
    # every edge appears in some maximal clique
    covered = {(min(i, j), max(i, j))
               for c in cliques for i, j in itertools.combinations(c, 2)}
    assert graph.edges <= covered


# ---------------------------------------------------------------------------
# sparsity certificates


def test_conic_sparsity_on_hexagon(hexagon_pair):
    graph = build_adjacency_graph(hexagon_pair)
    e = np.zeros(6)
    e[2] = 1.0
    assert is_conically_sparse(hexagon_pair, graph, e, s=1)

    adjacent = np.zeros(6)
    adjacent[[1, 2]] = 1.0
    assert is_conically_sparse(hexagon_pair, graph, adjacent, s=2)
    assert not is_conically_sparse(hexagon_pair, graph, adjacent, s=1)

    opposite = np.zeros(6)
    opposite[[0, 3]] = 1.0
    assert not is_conically_sparse(hexagon_pair, graph, opposite, s=2)

    with pytest.raises(NegativeCoefficient):
        is_conically_sparse(hexagon_pair, graph, -e, s=1)


def test_uniqueness_oracle_on_hexagon(hexagon_pair):
    delta = hexagon_pair.vertex.delta
    adjacent = np.zeros(6)
    adjacent[[1, 2]] = 1.0
    assert representation_uniqueness(hexagon_pair, delta @ adjacent, adjacent)

    opposite = np.zeros(6)
    opposite[[0, 3]] = 1.0
    assert not representation_uniqueness(hexagon_pair, delta @ opposite,
                                         opposite)

    with pytest.raises(InfeasibleCertificate):
        representation_uniqueness(hexagon_pair, np.array([5.0, 5.0, -1.0]),
                                  adjacent)


def test_clique_criterion_agrees_with_uniqueness_oracle():
    rng = np.random.default_rng(41)
    done = 0
    while done < 12:
        n = int(rng.integers(3, 5))
        a = random_proper_cone(rng, n, int(rng.integers(n, 8)))
        if a is None:
            continue
        vertex = facet_to_vertex(FacetCone(a))
        d = vertex.n_rays
        if d > 8:
            continue
        done += 1
        pair = DDPair(FacetCone(a), vertex)
        graph = build_adjacency_graph(pair)
        for size in (1, 2, 3):
            for supp in itertools.combinations(range(d), min(size, d)):
                b = np.zeros(d)
                b[list(supp)] = rng.uniform(0.5, 1.5, len(supp))
                sparse = is_conically_sparse(pair, graph, b, s=len(supp))
                unique = representation_uniqueness(pair, vertex.delta @ b, b)
                assert sparse == unique, (supp, a)


def test_weak_sparsity():
    graph = six_cycle()
    single = np.zeros(6)
    single[3] = 1.0
    assert is_weakly_eps_sparse(graph, single, eps=0.1)

    spread = np.zeros(6)
    spread[[0, 3]] = 1.0
    assert not is_weakly_eps_sparse(graph, spread, eps=0.1)

    hood = np.zeros(6)
    hood[[0, 1, 5]] = 1.0   # closed neighborhood of node 0
    assert is_weakly_eps_sparse(graph, hood, eps=0.1)

    # below-threshold coefficients are ignored
    noisy = hood.copy()
    noisy[3] = 0.05
    assert is_weakly_eps_sparse(graph, noisy, eps=0.1)
    with pytest.raises(NegativeCoefficient):
        is_weakly_eps_sparse(graph, -single, eps=0.1)


def test_clique_set_canonical_form():
    cs = CliqueSet(((3, 1), (0, 2)))
    assert cs.cliques == ((0, 2), (1, 3))
    assert len(cs) == 2
