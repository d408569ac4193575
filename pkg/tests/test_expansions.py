import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from higsfa.expansions import ExpansionError, ExpansionSpec, Term, expand, expanded_dim
from higsfa.graphs import linear_graph
from higsfa.gsfa import train_gsfa

from oracles import align_signs


def test_identity_plus_quadratic_on_two_inputs():
    out = expand(ExpansionSpec.quadratic(), np.array([1.0, 2.0]))
    assert np.array_equal(out, [1, 2, 1, 2, 4])
    assert expanded_dim(ExpansionSpec.quadratic(), 2) == 5


def test_e08_zero_and_unit():
    out = expand(ExpansionSpec((Term("e08"),)), np.array([0.0, -1.0]))
    assert np.array_equal(out, [0.0, 1.0])


def test_qn_normalisation():
    out = expand(ExpansionSpec((Term("qn"),)), np.array([1.0, 1.0]))
    assert np.allclose(out, [1 / 3, 1 / 3, 1 / 3])


def test_max2_neighbour_maxima():
    out = expand(ExpansionSpec((Term("max2"),)), np.array([3.0, -1.0, 2.0, 5.0]))
    assert np.array_equal(out, [3.0, 2.0, 5.0])


@pytest.mark.parametrize("spec, k, dim", [
    (ExpansionSpec.quadratic(), 10, 65),
    (ExpansionSpec.identity(), 7, 7),
    (ExpansionSpec((Term("max2"),)), 18, 17),
])
def test_expanded_dims(spec, k, dim):
    assert expanded_dim(spec, k) == dim
    assert expand(spec, np.ones(k)).shape == (dim,)


def test_json_round_trip_of_layer_one_mixture():
    obj = [{"term": "identity", "to": 18}, {"term": "e08", "to": 15},
           {"term": "max2", "to": 17}, {"term": "qt", "to": 10}]
    spec = ExpansionSpec.from_json(obj)
    assert spec.to_json() == obj
    assert expanded_dim(spec, 20) == 18 + 15 + 16 + 55


def test_slices_select_components():
    spec = ExpansionSpec.from_json([{"term": "identity", "from": 2, "to": 4}, {"term": "qt", "from": 1, "to": 3}])
    out = expand(spec, np.array([1.0, 2.0, 3.0, 4.0]))
    assert np.array_equal(out, [3, 4, 4, 6, 9])


def test_out_of_range_slice_rejected():
    spec = ExpansionSpec((Term("qt", 0, 5),))
    with pytest.raises(ExpansionError):
        expand(spec, np.ones(4))
    with pytest.raises(ExpansionError):
        Term("cubic")
    with pytest.raises(ExpansionError):
        ExpansionSpec.from_json("cubic")


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.integers(1, 8), elements=st.floats(-1e3, 1e3)))
def test_every_term_has_declared_size_and_is_finite(x):
    spec = ExpansionSpec(tuple(Term(k) for k in ("identity", "qt", "qn", "e08", "max2")))
    out = expand(spec, x)
    assert out.shape == (expanded_dim(spec, len(x)),)
    assert np.all(np.isfinite(out))
    assert np.all(np.isfinite(expand(spec, np.zeros(len(x)))))


def test_batch_equals_rows():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((6, 5))
    spec = ExpansionSpec(tuple(Term(k) for k in ("identity", "qn", "e08", "max2")))
    assert np.allclose(expand(spec, X), np.array([expand(spec, x) for x in X]), atol=1e-15)


def _slow_data(n=3000, seed=0):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 4 * np.pi, n)
    S = np.column_stack([np.sin(t), np.cos(3 * t), rng.standard_normal(n)])
    return S


def test_quadratic_gsfa_invariant_to_linear_mixing():
    S = _slow_data()
    A = np.array([[1.0, 0.4, -0.2], [0.3, 1.0, 0.5], [-0.6, 0.2, 1.0]])
    g = linear_graph(len(S))
    q = ExpansionSpec.quadratic()
    Y1 = train_gsfa(q(S), g, 4).extract(q(S))
    Y2 = train_gsfa(q(S @ A.T), g, 4).extract(q(S @ A.T))
    assert np.max(np.abs(Y1 - align_signs(Y1, Y2))) < 1e-6


def test_e08_gsfa_invariant_to_positive_diagonal_scaling():
    S = _slow_data(seed=1)
    spec = ExpansionSpec((Term("identity"), Term("e08")))
    g = linear_graph(len(S))
    scale = np.array([0.5, 3.0, 7.0])
    Y1 = train_gsfa(spec(S), g, 4).extract(spec(S))
    Y2 = train_gsfa(spec(S * scale), g, 4).extract(spec(S * scale))
    assert np.max(np.abs(Y1 - align_signs(Y1, Y2))) < 1e-6
