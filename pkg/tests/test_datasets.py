import numpy as np
import pytest
from scipy import stats

from higsfa.datasets import gen_latent_regression, gen_multilabel, gen_toy_infoloss, generate, rng_for
from higsfa.errors import ConfigError
from higsfa.graphs import linear_graph, serial_graph
from higsfa.gsfa import delta_of, train_gsfa


def test_toy_chains_have_expected_deltas():
    d = gen_toy_infoloss(100_000, seed=0)
    S = np.column_stack([d.latents[k] for k in ("s1", "s2", "s3", "n")])
    rep = delta_of(S, linear_graph(len(S)))
    assert np.all(np.abs(rep.deltas - [0.2, 0.4, 0.8, 2.0]) < 0.05)
    assert np.array_equal(d.X, np.column_stack([S[:, 1], S[:, 0] * S[:, 3], S[:, 2], S[:, 3]]))
    noise = d.latents["n"]
    assert abs(np.corrcoef(noise[:-1], noise[1:])[0, 1]) < 0.01


def test_toy_rejects_bad_probabilities():
    with pytest.raises(ConfigError):
        gen_toy_infoloss(100, flip_probs=(0.0, 0.1, 0.2, 0.5))
    with pytest.raises(ConfigError):
        gen_toy_infoloss(100, flip_probs=(0.6, 0.1, 0.2, 0.5))


@pytest.mark.parametrize("gen", [gen_toy_infoloss, gen_latent_regression, gen_multilabel])
def test_fixed_seed_is_bit_identical(gen):
    a, b, c = gen(1000, seed=5), gen(1000, seed=5), gen(1000, seed=6)
    assert a.X.tobytes() == b.X.tobytes()
    assert np.array_equal(a.split, b.split)
    assert not np.array_equal(a.X, c.X)


def test_generator_streams_are_named():
    a = rng_for("a", 1).random(4)
    assert not np.array_equal(a, rng_for("b", 1).random(4))
    assert np.array_equal(a, rng_for("a", 1).random(4))
    with pytest.raises(ConfigError):
        rng_for("a", -1)


def test_linear_latent_regression_first_feature_tracks_label():
    d = gen_latent_regression(5000, input_dim=16, noise=0.0, seed=1, mixing="linear")
    g, _ = serial_graph(d.labels["theta"], 30)
    y = train_gsfa(d.X, g, 1).extract(d.X)[:, 0]
    assert abs(np.corrcoef(y, d.labels["theta"])[0, 1]) > 0.99


def test_label_marginal_is_close_to_uniform():
    d = gen_latent_regression(20_000, seed=2)
    assert stats.kstest(d.labels["theta"], "uniform").statistic < 0.05
    assert np.all((d.labels["theta"] >= 0) & (d.labels["theta"] <= 1))


def test_latent_regression_splits_and_params():
    d = gen_latent_regression(1000, seed=3)
    assert [int(d.mask(s).sum()) for s in ("dr", "s", "test")] == [500, 250, 250]
    assert d.subset("s").n_samples == 250
    with pytest.raises(ConfigError):
        gen_latent_regression(100, input_dim=10)
    with pytest.raises(ConfigError):
        gen_latent_regression(100, mixing="cubic")


def test_multilabel_balance_and_recovery():
    d = gen_multilabel(6000, seed=4)
    for name in ("b1", "b2"):
        assert abs(d.labels[name].mean() - 0.5) < 0.01
    g, _ = serial_graph(d.labels["theta"], 30)
    y = train_gsfa(d.X, g, 1).extract(d.X)[:, 0]
    assert abs(np.corrcoef(y, d.labels["theta"])[0, 1]) > 0.9


def test_generate_dispatch_errors():
    assert generate("multilabel", 0, n=100).n_samples == 100
    with pytest.raises(ConfigError):
        generate("faces", 0)
    with pytest.raises(ConfigError):
        generate("multilabel", 0, n=100, colour=True)
