from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from nnbicm.channel import SubcarrierObservation
from nnbicm.mathcore import ConfigurationError, RandomSource
from nnbicm.modem import demap_extrinsic, demap_from_probs, interleave
from nnbicm.neuralnet import TrainConfig, infer_likelihoods, init_network
from nnbicm.pipelines import (
    Link, RxOutput, SystemConfig, _symbol_llrs_to_codeword, aggregate, channel_frames, feedback_priors,
    frame_source, make_receiver, random_messages, run_ber_point, run_ber_points, run_named_receivers,
    rx_map_bicm, rx_nn_bicm, rx_nn_bicm_id, simulate_batch, tx_frame, tx_frames, wilson_interval,
)
from nnbicm.training import train_stage

GOLDEN = Path(__file__).parent / "data" / "golden_zero_message.npy"
CLEAN_QPSK = SystemConfig(N=64, M=2, psi_db=40.0)


@pytest.fixture(scope="module")
def qpsk_nets():
    net1 = train_stage(CLEAN_QPSK, (16, 8), TrainConfig(gamma_t_db=4.0, epochs=60, seed=1)).net
    net2 = train_stage(CLEAN_QPSK, (16, 8), TrainConfig(gamma_t_db=2.0, epochs=60, seed=2), "net2", net1).net
    return net1, net2


def _batch(cfg, frames=4, seed=3, gamma=None):
    link = Link(cfg)
    ids = list(range(frames))
    tx = tx_frames(random_messages(link, ids, seed), link, ids, seed)
    s2 = 0.0 if gamma is None else link.sigma_n2(gamma)
    return link, tx, channel_frames(tx, link, ids, seed, s2)


def test_frame_geometry_fig4():
    link = Link(SystemConfig(N=64, M=4))
    assert (link.n_ofdm, link.n_filler, link.K) == (11, 68, 31)
    tx = tx_frame(np.zeros(link.code.k, dtype=np.int8), link.cfg, link=link)
    assert tx.time_signal.shape == (1, 11, 64) and tx.filler.shape == (1, 68)


def test_system_config_validation():
    for bad in (dict(N=48), dict(M=3), dict(id_iterations=0), dict(receiver="ml"), dict(map_mode="C"),
                dict(interleaver="block")):
        with pytest.raises(ConfigurationError):
            SystemConfig(**bad)


def test_tx_rejects_wrong_message_length():
    link = Link(SystemConfig())
    with pytest.raises(ValueError, match="message length"):
        tx_frames(np.zeros((1, 5)), link, [0], 1)


def test_golden_zero_message_waveform():
    cfg = SystemConfig(N=64, M=4, psi_db=60.0, interleaver="identity")
    link = Link(cfg)
    tx = tx_frame(np.zeros(link.code.k, dtype=np.int8), cfg, rng_seed=1, link=link)
    assert np.allclose(tx.time_signal[0], np.load(GOLDEN), atol=1e-12, rtol=0)
    # first 10 OFDM symbols carry only zero codeword bits: label 0 on every data subcarrier
    frame = np.zeros(64, complex)
    frame[1:32] = link.const.points[0]
    frame[33:] = np.conj(frame[1:32][::-1])
    ref = np.fft.ifft(frame, norm="ortho").real + link.clip.mu
    assert np.allclose(tx.time_signal[0, :10], ref, atol=1e-12, rtol=0)


def test_tx_is_deterministic():
    cfg = SystemConfig()
    link = Link(cfg)
    msg = RandomSource(4).bits(link.code.k)
    a = tx_frame(msg, cfg, rng_seed=9, frame_index=2, link=link)
    b = tx_frame(msg, cfg, rng_seed=9, frame_index=2, link=link)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_bit_order_round_trip_by_tagging():
    link = Link(SystemConfig(N=64, M=4, interleaver_seed=11))
    tags = np.arange(link.code.n, dtype=float)[None] + 1
    stream = np.concatenate((interleave(tags, link.interleaver), -np.ones((1, link.n_filler))), axis=1)
    per_symbol = stream.reshape(1, link.n_ofdm, link.K, link.cfg.M)
    assert np.array_equal(_symbol_llrs_to_codeword(per_symbol, link), tags)


def test_map_inverse_property():
    for M in (2, 4, 6):
        cfg = SystemConfig(N=64, M=M, psi_db=40.0)
        link, tx, obs = _batch(cfg)
        rx = rx_map_bicm(obs, link)
        assert np.array_equal(rx.decoded, tx.messages) and rx.converged.all()


def test_nn_inverse_property(qpsk_nets):
    net1, net2 = qpsk_nets
    link, tx, obs = _batch(CLEAN_QPSK)
    assert np.array_equal(rx_nn_bicm(obs, link, net1).decoded, tx.messages)
    assert np.array_equal(rx_nn_bicm_id(obs, link, net1, net2, tx.filler).decoded, tx.messages)


def test_map_high_snr_error_free():
    p = run_ber_point(replace(CLEAN_QPSK, gamma_e_db=20.0), 100)
    assert p.bit_errors == 0 and p.frames == 100


def test_map_mode_b_beats_mode_a_under_heavy_clipping():
    cfg = SystemConfig(N=64, M=4, psi_db=6.0)
    link_a, link_b = Link(cfg), Link(replace(cfg, map_mode="B"))
    r = run_ber_points(cfg, 60, {"A": lambda o, t: rx_map_bicm(o, link_a), "B": lambda o, t: rx_map_bicm(o, link_b)},
                       9.0, link=link_a)
    assert r["B"].ber <= r["A"].ber
    assert r["B"].ci[1] < r["A"].ci[0]


def test_nn_id_single_iteration_equals_nn(qpsk_nets):
    net1, net2 = qpsk_nets
    link, tx, obs = _batch(CLEAN_QPSK, frames=6, gamma=1.0)
    a = rx_nn_bicm(obs, link, net1)
    for net in (net2, None):
        b = rx_nn_bicm_id(obs, link, net1, net, tx.filler, iterations=1)
        assert np.array_equal(a.codewords, b.codewords) and np.array_equal(a.bp_iterations, b.bp_iterations)


def test_nn_id_iterates_only_unconverged_frames(qpsk_nets):
    net1, net2 = qpsk_nets
    link, tx, obs = _batch(CLEAN_QPSK, frames=8, gamma=1.0)
    one = rx_nn_bicm(obs, link, net1)
    two = rx_nn_bicm_id(obs, link, net1, net2, tx.filler, iterations=2)
    assert np.array_equal(two.outer_iterations, np.where(one.converged, 1, 2))
    keep = one.converged
    assert np.array_equal(two.codewords[keep], one.codewords[keep])


def test_zero_extrinsic_gives_uniform_priors_and_single_pass_llrs(qpsk_nets):
    _, net2 = qpsk_nets
    link, tx, obs = _batch(CLEAN_QPSK, frames=2, gamma=3.0)
    La, pmf = feedback_priors(np.zeros((2, link.code.n)), tx.filler, link)
    flat = pmf.reshape(2, -1, 4)
    n_data_sym = link.code.n // link.cfg.M
    assert np.allclose(flat[:, :n_data_sym], 0.25)
    P2 = infer_likelihoods(net2, SubcarrierObservation(obs.y, obs.sigma_n2, pmf))
    ext = demap_extrinsic(P2, La, link.const).reshape(2, -1, 2)[:, :n_data_sym]
    single = demap_from_probs(P2, link.const).reshape(2, -1, 2)[:, :n_data_sym]
    assert np.allclose(ext, single, atol=1e-9)


def test_filler_priors_are_saturated_true_values():
    link, tx, _ = _batch(SystemConfig(N=64, M=4), frames=2)
    La, _ = feedback_priors(np.zeros((2, link.code.n)), tx.filler, link)
    tail = La.reshape(2, -1)[:, link.code.n:]
    assert np.array_equal(tail > 0, tx.filler.astype(bool)) and np.all(np.abs(tail) == 30.0)


def test_untrained_net_gives_zero_llrs():
    link, tx, obs = _batch(SystemConfig(N=64, M=4), frames=3, gamma=20.0)
    rx = rx_nn_bicm(obs, link, init_network([3, 8, 16], "zeros"))
    assert rx.llr_stats["demapper"]["mean_abs"] == 0.0
    assert np.all(rx.codewords == 0)
    ber = np.mean(rx.decoded != tx.messages)
    assert 0.4 < ber < 0.6


def test_model_mismatch_errors(qpsk_nets):
    net1, _ = qpsk_nets
    cfg = SystemConfig(N=64, M=4)
    link = Link(cfg)
    with pytest.raises(ConfigurationError, match="outputs"):
        make_receiver(cfg, link, net1, receiver="nn")
    with pytest.raises(ConfigurationError, match="net1"):
        make_receiver(cfg, link, None, receiver="nn")
    qlink = Link(CLEAN_QPSK)
    with pytest.raises(ConfigurationError, match="net2"):
        make_receiver(CLEAN_QPSK, qlink, net1, None, receiver="nn-id")
    with pytest.raises(ConfigurationError, match="inputs"):
        make_receiver(CLEAN_QPSK, qlink, net1, net1, receiver="nn-id")


def test_receivers_share_observations(qpsk_nets):
    net1, net2 = qpsk_nets
    link = Link(CLEAN_QPSK)
    seen = {}

    def spy(name, inner):
        def fn(obs, tx):
            seen[name] = obs.y.copy()
            return inner(obs, tx)
        return fn

    rx = {r: spy(r, make_receiver(CLEAN_QPSK, link, net1, net2, r)) for r in ("map", "nn", "nn-id")}
    simulate_batch(link, [3, 4], 7, link.sigma_n2(2.0), rx)
    assert np.array_equal(seen["map"], seen["nn"]) and np.array_equal(seen["map"], seen["nn-id"])
    simulate_batch(link, [3, 4], 7, link.sigma_n2(2.0), {"map": spy("solo", rx["map"])})
    assert np.array_equal(seen["solo"], seen["map"])


def test_frames_independent_of_batching():
    link = Link(SystemConfig(N=64, M=4))
    a = random_messages(link, [5], 2)
    b = random_messages(link, [3, 4, 5], 2)[2]
    assert np.array_equal(a[0], b)
    assert not np.array_equal(frame_source(2, 5).stream("noise").normal(4), frame_source(2, 6).stream("noise").normal(4))


def test_ber_point_determinism_and_batch_invariance():
    cfg = SystemConfig(N=64, M=4, gamma_e_db=4.0)
    a = run_ber_point(cfg, 12, batch_size=5)
    b = run_ber_point(cfg, 12, batch_size=12)
    assert a == b and a.bit_errors > 0
    c = run_named_receivers(cfg, 12, ["map"], batch_size=4, workers=2)["map"]
    assert c == a


def test_bernoulli_injection_within_ci():
    link = Link(SystemConfig(N=64, M=4))
    p = 0.01

    def flipper(obs, tx):
        rng = np.random.default_rng(int(tx.messages.sum()))
        flips = (rng.random(tx.messages.shape) < p).astype(np.int8)
        dec = tx.messages ^ flips
        B = dec.shape[0]
        return RxOutput(dec, tx.codewords, np.ones(B, bool), np.zeros(B, int), np.ones(B, int))

    r = run_ber_points(link.cfg, 300, {"inj": flipper}, link=link)["inj"]
    lo, hi = r.ci
    assert lo <= p <= hi
    assert r.bits == 300 * link.code.k


def test_aggregate_and_wilson():
    pt = aggregate([0, 3, 0, 1], 100, [5, 7, 5, 3], 6.0, "map", 1)
    assert (pt.bit_errors, pt.bits, pt.frame_errors, pt.frames) == (4, 400, 2, 4)
    assert pt.ber == 0.01 and pt.fer == 0.5 and pt.mean_bp_iters == 5.0
    lo, hi = wilson_interval(4, 400)
    assert lo < 0.01 < hi
    # closed-form Wilson bound for zero errors: z^2 / (n + z^2)
    z = 1.959963984540054
    assert wilson_interval(0, 1000)[1] == pytest.approx(z * z / (1000 + z * z), rel=1e-9)
    with pytest.raises(ValueError):
        run_ber_point(SystemConfig(), 0)
