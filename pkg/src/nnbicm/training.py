"""Training-set generation and the two training stages of the NN receivers.

Stage ``net1`` learns p(S | Y, sigma^2) from received subcarriers at the
training Eb/N0.  Stage ``net2`` additionally sees the prior PMF fed back by
the decoder: the training channel realizations are run through the
iteration-1 receiver (net1 + BP) and the decoder extrinsic LLRs become the
priors of the training records.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .channel import SubcarrierObservation
from .mathcore import RandomSource
from .modem import demap_from_probs
from .neuralnet import (
    NeuralNet, TrainConfig, TrainingSet, TrainReport, infer_likelihoods, init_network, observation_inputs, train,
)
from .pipelines import (
    Link, SystemConfig, _decode, _symbol_llrs_to_codeword, channel_frames, feedback_priors,
    random_messages, tx_frames,
)

DATASET_CODEWORDS = 50


def dataset_layout(link: Link, codewords: int = DATASET_CODEWORDS):
    """(records, OFDM symbols, codewords to simulate) for a 50 N_c-bit training set."""
    n_sym = math.ceil(codewords * link.code.n / link.cfg.M)
    n_ofdm = math.ceil(n_sym / link.K)
    return n_ofdm * link.K, n_ofdm, math.ceil(n_ofdm / link.n_ofdm)


def gen_dataset(cfg: SystemConfig, gamma_t_db: float, stage: str = "net1", seed: int = 1000,
                net1: NeuralNet | None = None, prior_source=None,
                codewords: int = DATASET_CODEWORDS) -> TrainingSet:
    """Simulate the transmit chain at ``gamma_t_db`` and label every data subcarrier.

    For ``stage="net2"`` priors come from ``prior_source`` (an array with
    one PMF per record) or, when absent, from decoding with ``net1``.
    """
    if stage not in ("net1", "net2"):
        raise ValueError(f"stage must be net1 or net2, got {stage!r}")
    link = Link(replace(cfg, gamma_e_db=gamma_t_db))
    n_rec, n_ofdm, n_cw = dataset_layout(link, codewords)
    ids = list(range(n_cw))
    s2 = link.sigma_n2(gamma_t_db)
    msgs = random_messages(link, ids, seed)
    tx = tx_frames(msgs, link, ids, seed)
    obs = channel_frames(tx, link, ids, seed, s2)
    targets = tx.symbol_indices.reshape(-1)[:n_rec]
    y = obs.y.reshape(-1)[:n_rec]

    prior = None
    if stage == "net2":
        if prior_source is None:
            if net1 is None:
                raise ValueError("stage net2 needs net1 or an explicit prior_source")
            prior = iteration1_priors(obs, tx, link, net1).reshape(-1, link.const.order)[:n_rec]
        else:
            prior = np.asarray(prior_source, dtype=float)
            if prior.shape != (n_rec, link.const.order):
                raise ValueError(f"prior stream has shape {prior.shape}, expected {(n_rec, link.const.order)}")
    X = observation_inputs(SubcarrierObservation(y, obs.sigma_n2, prior), with_prior=prior is not None)
    return TrainingSet(X, targets.astype(np.int64), link.const.order)


def iteration1_priors(obs, tx, link: Link, net1: NeuralNet) -> np.ndarray:
    """Symbol prior PMFs (B, n_ofdm, K, 2^M) after one NN-BICM decoding pass."""
    P = infer_likelihoods(net1, SubcarrierObservation(obs.y, obs.sigma_n2))
    bp = _decode(_symbol_llrs_to_codeword(demap_from_probs(P, link.const), link), link)
    return feedback_priors(bp.extrinsic, tx.filler, link)[1]


def dataset_seed(train_seed: int, stage: str) -> int:
    """Channel seed of a training set; distinct from any BER simulation seed by construction."""
    return 1_000_003 * train_seed + (0 if stage == "net1" else 1)


@dataclass
class StageResult:
    net: NeuralNet
    report: TrainReport
    dataset: TrainingSet


def train_stage(cfg: SystemConfig, hidden, tcfg: TrainConfig, stage: str = "net1",
                net1: NeuralNet | None = None, data_seed: int | None = None) -> StageResult:
    """Generate the training set for ``stage`` and fit a fresh network on it."""
    M = cfg.M
    order = 1 << M
    d0 = 3 if stage == "net1" else 3 + order
    seed = dataset_seed(tcfg.seed, stage) if data_seed is None else data_seed
    data = gen_dataset(cfg, tcfg.gamma_t_db, stage, seed=seed, net1=net1)
    net = init_network([d0, *hidden, order], tcfg.init_scheme, RandomSource(tcfg.seed).stream("init"))
    net, rep = train(net, data, tcfg)
    return StageResult(net, rep, data)
