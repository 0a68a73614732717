import numpy as np
import pytest

from nnbicm.neuralnet import TrainConfig, cross_entropy, forward, init_network
from nnbicm.pipelines import Link, SystemConfig, channel_frames, random_messages, tx_frames
from nnbicm.training import dataset_layout, dataset_seed, gen_dataset, train_stage

FIG4 = SystemConfig(N=64, M=4, psi_db=9.0)


def test_dataset_layout_fig4():
    # 50 * 1296 / 4 = 16200 symbols -> 523 OFDM symbols of 31 subcarriers, from 48 super-frames of 11
    n_rec, n_ofdm, n_cw = dataset_layout(Link(FIG4))
    assert (n_rec, n_ofdm, n_cw) == (16213, 523, 48)


def test_net1_dataset_records_and_labels():
    ds = gen_dataset(FIG4, 13.0, seed=5)
    assert ds.inputs.shape == (16213, 3) and ds.n_classes == 16
    link = Link(FIG4)
    _, _, n_cw = dataset_layout(link)
    ids = list(range(n_cw))
    tx = tx_frames(random_messages(link, ids, 5), link, ids, 5)
    assert np.array_equal(ds.targets, tx.symbol_indices.reshape(-1)[:16213])
    obs = channel_frames(tx, link, ids, 5, link.sigma_n2(13.0))
    y = obs.y.reshape(-1)[:16213]
    assert np.array_equal(ds.inputs[:, 0], y.real) and np.array_equal(ds.inputs[:, 1], y.imag)
    assert np.all(ds.inputs[:, 2] == link.sigma_n2(13.0))


def test_dataset_is_deterministic_and_seeded():
    a = gen_dataset(FIG4, 13.0, seed=5, codewords=4)
    b = gen_dataset(FIG4, 13.0, seed=5, codewords=4)
    c = gen_dataset(FIG4, 13.0, seed=6, codewords=4)
    assert np.array_equal(a.inputs, b.inputs) and np.array_equal(a.targets, b.targets)
    assert not np.array_equal(a.inputs, c.inputs)


def test_net2_dataset_prior_columns():
    n_rec = dataset_layout(Link(FIG4), 4)[0]
    prior = np.full((n_rec, 16), 1 / 16)
    ds = gen_dataset(FIG4, 10.0, "net2", seed=5, prior_source=prior, codewords=4)
    assert ds.inputs.shape == (n_rec, 19)
    assert np.array_equal(ds.inputs[:, 3:], prior)


def test_net2_dataset_errors():
    with pytest.raises(ValueError, match="shape"):
        gen_dataset(FIG4, 10.0, "net2", prior_source=np.full((10, 16), 1 / 16), codewords=4)
    with pytest.raises(ValueError, match="net1"):
        gen_dataset(FIG4, 10.0, "net2", codewords=4)
    with pytest.raises(ValueError):
        gen_dataset(FIG4, 10.0, "net3")


def test_net2_priors_from_net1_are_pmfs():
    net1 = init_network([3, 4, 16], "zeros")
    ds = gen_dataset(FIG4, 10.0, "net2", net1=net1, codewords=2)
    p = ds.inputs[:, 3:]
    assert np.allclose(p.sum(axis=1), 1) and np.all(p >= 0)


def test_dataset_seeds_distinct():
    seeds = {dataset_seed(s, st) for s in range(1, 50) for st in ("net1", "net2")}
    assert len(seeds) == 98


def test_train_stage_small_recipe_reduces_loss():
    cfg = SystemConfig(N=64, M=2, psi_db=40.0)
    res = train_stage(cfg, (8,), TrainConfig(gamma_t_db=4.0, epochs=20, seed=3))
    assert res.net.layer_dims == (3, 8, 4)
    assert res.report.final_loss <= 0.8 * res.report.initial_loss
    again = train_stage(cfg, (8,), TrainConfig(gamma_t_db=4.0, epochs=20, seed=3))
    assert np.array_equal(res.net.flat(), again.net.flat())
    assert cross_entropy(forward(res.net, res.dataset.inputs)[1], res.dataset.targets) < np.log(4)
