import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from singlefactor.errors import (InvalidOrder, InvalidParameter, NonSymmetricW,
                                 RhoOutOfRange)
from singlefactor.graphs import (GraphPrior, UndirectedGraph, all_graphs, build_ar_graph,
                                 build_car_rate, complement, is_identifiable, log_prior,
                                 neighborhood_graph, read_graph, write_graph)

from .oracles import components, odd_cycle_bruteforce


@st.composite
def graphs(draw, pmax=7):
    p = draw(st.integers(1, pmax))
    m = p * (p - 1) // 2
    bits = draw(st.lists(st.booleans(), min_size=m, max_size=m))
    iu = np.triu_indices(p, 1)
    adj = np.zeros((p, p), dtype=bool)
    adj[iu] = bits
    return UndirectedGraph(adj | adj.T)


def test_complement_examples():
    assert complement(UndirectedGraph.complete(5)) == UndirectedGraph.empty(5)
    Gc = UndirectedGraph.from_edges(5, [(1, 4), (1, 5), (2, 4), (2, 5), (3, 4), (3, 5), (4, 5)])
    assert complement(Gc).edges == [(1, 2), (1, 3), (2, 3)]


@settings(max_examples=100, deadline=None)
@given(graphs())
def test_complement_involution_and_sizes(G):
    assert complement(complement(G)) == G
    assert G.size() + complement(G).size() == G.m


def test_identifiable_examples():
    G1 = UndirectedGraph.from_edges(5, [(1, 2), (1, 3), (2, 3)])
    G2 = complement(UndirectedGraph.from_edges(5, [(1, 3), (1, 4), (2, 4), (2, 5), (3, 5)]))
    assert is_identifiable(G1)
    assert is_identifiable(G2)
    for p in range(1, 8):
        assert not is_identifiable(UndirectedGraph.complete(p))
        assert is_identifiable(UndirectedGraph.empty(p)) == (p >= 3)


@pytest.mark.parametrize("p", range(1, 7))
def test_identifiable_matches_bruteforce(p):
    for G in all_graphs(p):
        cadj = complement(G).adj
        expected = all(odd_cycle_bruteforce(cadj[np.ix_(c, c)]) for c in components(cadj))
        assert is_identifiable(G) == expected, G


def test_no_identifiable_graph_below_three_vertices():
    for p in (1, 2):
        assert not any(is_identifiable(G) for G in all_graphs(p))


@pytest.mark.parametrize("p", range(1, 6))
def test_prior_sums_to_one(p):
    prior = GraphPrior(p)
    total = sum(np.exp(log_prior(prior, G)) for G in all_graphs(p))
    assert np.isclose(total, 1.0)


def test_prior_value():
    # m = 10, size 3: 1 / (11 * C(10, 3))
    G = UndirectedGraph.from_edges(5, [(1, 2), (1, 3), (2, 3)])
    assert np.isclose(log_prior(GraphPrior(5), G), -np.log(11 * 120))


def test_ar_graphs():
    assert build_ar_graph(4, 1).edges == [(1, 2), (2, 3), (3, 4)]
    assert build_ar_graph(5, 2).edges == [(1, 2), (1, 3), (2, 3), (2, 4), (3, 4), (3, 5), (4, 5)]
    assert build_ar_graph(5, 4) == UndirectedGraph.complete(5)
    with pytest.raises(InvalidOrder):
        build_ar_graph(5, 5)


def test_car_rate():
    W = np.array([[0, 1], [1, 0.0]])
    D = build_car_rate(W, 0.5, 3.0)
    # (delta - 2) (E - rho W)^{-1}
    assert np.allclose(D, np.linalg.inv(np.array([[1, -0.5], [-0.5, 1.0]])))
    assert np.all(np.linalg.eigvalsh(D) > 0)
    with pytest.raises(RhoOutOfRange):
        build_car_rate(W, 1.0, 3.0)
    with pytest.raises(NonSymmetricW):
        build_car_rate(np.array([[0, 1], [0, 0.0]]), 0.5, 3.0)
    with pytest.raises(InvalidParameter):
        build_car_rate(W, 0.5, 2.0)


def test_neighborhood_graph_chain():
    W = np.diag(np.ones(3), 1) + np.diag(np.ones(3), -1)
    assert neighborhood_graph(W).edges == [(1, 2), (2, 3), (3, 4)]


def test_graph_file_roundtrip(tmp_path):
    G = UndirectedGraph.from_edges(6, [(1, 2), (3, 6), (4, 5)])
    path = tmp_path / "g.txt"
    write_graph(G, path)
    assert read_graph(path) == G


def test_from_edges_is_one_indexed():
    G = UndirectedGraph.from_edges(3, [(1, 3)])
    assert G.has_edge(1, 3) and G.has_edge(3, 1) and not G.has_edge(1, 2)
    assert G.flip(1, 2).edges == [(1, 2), (1, 3)]
