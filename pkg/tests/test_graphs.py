import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from higsfa.graphs import (GraphError, GraphWarning, clustered_graph, combine_graphs,
                           graph_from_edges, linear_graph, serial_graph, validate_graph)

from oracles import clustered_weights, serial_weights


def test_linear_graph_four_samples():
    g = linear_graph(4)
    assert g.edges == [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]
    assert np.array_equal(g.vertex_weights, np.ones(4))
    assert g.edge_normalizer == 6.0
    assert g.vertex_normalizer == 4.0


def test_linear_graph_too_short():
    with pytest.raises(GraphError):
        linear_graph(2)


def test_clustered_weights_from_class_sizes():
    g = clustered_graph(["a", "a", "b", "b", "b"])
    assert g.edges == [(0, 1, 1.0), (2, 3, 0.5), (2, 4, 0.5), (3, 4, 0.5)]
    assert np.array_equal(g.vertex_weights, np.ones(5))


def test_singleton_class_has_no_edges_but_is_valid():
    g = clustered_graph([7])
    assert g.edges == []
    assert g.vertex_normalizer == 1.0
    assert not [f for f in validate_graph(g) if f.level == "error"]


def test_singleton_class_is_reported_isolated():
    findings = validate_graph(clustered_graph([0, 0, 1]))
    assert [str(f) for f in findings] == ["warning: isolated vertex 2"]


def test_empty_clustered_graph_rejected():
    with pytest.raises(GraphError):
        clustered_graph([])


def test_serial_six_samples_three_groups():
    g, gs = serial_graph(np.arange(1, 7), 3)
    assert list(gs.group_of_sample) == [0, 0, 1, 1, 2, 2]
    assert len(g.edges) == 8 and all(w == 1.0 for *_, w in g.edges)
    assert list(g.vertex_weights) == [1, 1, 2, 2, 1, 1]
    assert list(gs.representative_labels) == [1.5, 3.5, 5.5]
    assert validate_graph(g) == []


def test_serial_remainder_goes_to_first_groups():
    g, gs = serial_graph(np.arange(7.0), 3)
    assert list(gs.group_sizes) == [3, 2, 2]
    assert len(g.edges) == 6 + 4


def test_serial_singleton_groups_form_a_chain():
    g, gs = serial_graph(np.arange(5.0), 5)
    assert g.edges == [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0)]
    assert list(g.vertex_weights) == [1, 2, 2, 2, 1]


def test_serial_ties_broken_by_index():
    _, gs = serial_graph([1.0, 0.0, 1.0, 0.0, 2.0, 2.0], 3)
    assert list(gs.group_of_sample) == [1, 0, 1, 0, 2, 2]


@pytest.mark.parametrize("labels, groups", [(np.arange(4.0), 1), (np.arange(3.0), 4)])
def test_serial_rejects_degenerate_groups(labels, groups):
    with pytest.raises(GraphError):
        serial_graph(labels, groups)


def test_serial_rejects_collapsed_representatives():
    with pytest.raises(GraphError):
        serial_graph([1.0, 1.0, 1.0, 1.0], 2)


def test_combine_two_clustered_graphs_adds_weights():
    g = combine_graphs([clustered_graph([0, 0, 1, 1]), clustered_graph([0, 0, 0, 1])])
    W = g.weight_matrix()
    assert W[0, 1] == pytest.approx(1.0 + 0.5)
    assert W[0, 2] == pytest.approx(0.5)
    assert W[2, 3] == pytest.approx(1.0)
    assert np.array_equal(g.vertex_weights, np.full(4, 2.0))


def test_combine_single_graph_is_identity():
    g, _ = serial_graph(np.arange(9.0), 3)
    c = combine_graphs([g])
    assert c.edges == g.edges
    assert c.edge_normalizer == g.edge_normalizer and c.vertex_normalizer == g.vertex_normalizer


def test_combine_serial_and_clustered_warns_and_unions_edges():
    rng = np.random.default_rng(0)
    age = rng.random(12)
    sex = np.arange(12) % 2
    race = (np.arange(12) // 2) % 2
    s, _ = serial_graph(age, 3)
    with pytest.warns(GraphWarning):
        g = combine_graphs([s, clustered_graph(sex), clustered_graph(race)])
    Ws, _, _ = serial_weights(age, 3)
    Wa, _ = clustered_weights(sex)
    Wb, _ = clustered_weights(race)
    assert np.allclose(g.weight_matrix(), Ws + Wa + Wb)
    assert g.edge_normalizer == pytest.approx((Ws + Wa + Wb).sum())


def test_combine_mismatched_sizes_rejected():
    with pytest.raises(GraphError):
        combine_graphs([linear_graph(4), linear_graph(5)])
    with pytest.raises(GraphError):
        combine_graphs([])


def test_proportional_vertex_weights_do_not_warn():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        combine_graphs([clustered_graph([0, 0, 1, 1]), clustered_graph([0, 1, 0, 1]).scaled(1.0, 3.0)])


def test_validate_reports_self_loop_and_bad_weights():
    g = graph_from_edges(4, [(0, 1, 1.0), (2, 2, 1.0), (1, 3, -1.0)], validate=False)
    messages = [f.message for f in validate_graph(g)]
    assert "self-loop at 2" in messages
    assert any("non-positive edge weight" in m for m in messages)
    with pytest.raises(GraphError):
        graph_from_edges(4, [(0, 1, 1.0), (2, 2, 1.0)])


def test_validate_reports_range_order_and_duplicates():
    g = graph_from_edges(3, [(0, 5, 1.0), (2, 1, 1.0), (0, 1, 1.0), (0, 1, 2.0)], validate=False)
    messages = " | ".join(f.message for f in validate_graph(g))
    assert "outside" in messages and "i > j" in messages and "duplicate edge (0, 1)" in messages


def test_generic_graph_loader():
    g = graph_from_edges(3, [(0, 1, 2.0), (1, 2, 0.5)], vertex_weights=[1, 2, 1])
    assert g.edge_normalizer == 5.0 and g.vertex_normalizer == 4.0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=2, max_size=30))
def test_clustered_matches_dense_definition(classes):
    g = clustered_graph(classes)
    W, v = clustered_weights(classes)
    assert np.allclose(g.weight_matrix(), W)
    assert g.edge_normalizer == pytest.approx(W.sum(), rel=1e-12)
    assert np.array_equal(g.vertex_weights, v)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6).flatmap(
    lambda L: st.tuples(st.just(L), st.lists(st.floats(-5, 5, allow_nan=False), min_size=2 * L, max_size=40,
                                             unique=True))))
def test_serial_matches_dense_definition(case):
    L, labels = case
    g, gs = serial_graph(labels, L)
    W, v, group = serial_weights(labels, L)
    assert np.array_equal(gs.group_of_sample, group)
    assert np.allclose(g.weight_matrix(), W)
    assert np.array_equal(g.vertex_weights, v)
    assert g.edge_normalizer == pytest.approx(W.sum(), rel=1e-12)
    # same-group vertices share neighbour sets and weights
    Wd = g.weight_matrix()
    for k in range(L):
        rows = Wd[group == k]
        assert np.all(rows == rows[0])


@settings(max_examples=20, deadline=None)
@given(st.permutations(range(3)))
def test_combination_commutes(order):
    labels = np.linspace(0, 1, 9)
    parts = [serial_graph(labels, 3)[0], clustered_graph(np.arange(9) % 2), clustered_graph(np.arange(9) % 3)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GraphWarning)
        a = combine_graphs(parts)
        b = combine_graphs([parts[k] for k in order])
    assert np.allclose(a.weight_matrix(), b.weight_matrix())
    assert np.allclose(a.vertex_weights, b.vertex_weights)
    assert a.edge_normalizer == pytest.approx(b.edge_normalizer)


def test_permuted_graph_follows_samples():
    rng = np.random.default_rng(1)
    labels = rng.random(10)
    g, _ = serial_graph(labels, 3)
    order = rng.permutation(10)
    gp = g.permuted(order)
    assert np.allclose(gp.weight_matrix(), g.weight_matrix()[np.ix_(order, order)])
    assert np.allclose(gp.vertex_weights, g.vertex_weights[order])
