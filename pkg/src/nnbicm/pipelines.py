"""End-to-end LDPC-coded DCO-OFDM link: transmitter and the three BICM receivers.

One codeword forms a super-frame of ``n_ofdm`` OFDM symbols.  The interleaved
codeword fills the bit stream first; the tail of the last OFDM symbol is
padded with seeded filler bits that the receiver knows and never scores.
Every frame draws its randomness from ``RandomSource(seed).stream("frames")
.child(frame_index)``, so results do not depend on batching or receiver.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy.stats import binomtest

from . import ldpc
from .channel import SubcarrierObservation, bandwidth_utilization, noise_variance, receive_subcarriers
from .ldpc import LLR_MAX, LdpcCode, decode_bp, encode, load_code
from .mathcore import ConfigurationError, RandomSource, is_power_of_two
from .modem import (
    Constellation, Interleaver, bits_to_indices, build_constellation, deinterleave,
    demap_extrinsic, demap_from_probs, demap_gaussian, interleave, prior_pmf_from_llrs,
)
from .neuralnet import NeuralNet, infer_likelihoods
from .ofdm import ClippingParams, bias_and_clip, frame_subcarriers, to_time

RECEIVERS = ("map", "nn", "nn-id")

VAR_FLOOR = 1e-12


@dataclass
class SystemConfig:
    N: int = 64
    M: int = 4
    code: str = "80211n-1296"
    psi_db: float = 9.0
    gamma_e_db: float = 13.0
    receiver: str = "map"
    map_mode: str = "A"
    net1_model: str = ""
    net2_model: str = ""
    id_iterations: int = 2
    bp_max_iter: int = 50
    seed: int = 1
    interleaver_seed: int = 7
    interleaver: str = "random"

    def __post_init__(self):
        if not is_power_of_two(self.N) or self.N < 4:
            raise ConfigurationError(f"FFT size must be a power of two >= 4, got {self.N}")
        if self.M not in (2, 4, 6, 8):
            raise ConfigurationError(f"bits per symbol must be 2, 4, 6 or 8, got {self.M}")
        if self.M * (self.N // 2 - 1) <= 0:
            raise ConfigurationError("no data subcarriers")
        if self.id_iterations < 1:
            raise ConfigurationError("id_iterations must be >= 1")
        if self.receiver not in RECEIVERS:
            raise ConfigurationError(f"receiver must be one of {RECEIVERS}, got {self.receiver!r}")
        if self.map_mode not in ("A", "B"):
            raise ConfigurationError("map_mode must be 'A' (noise only) or 'B' (noise + distortion)")
        if self.interleaver not in ("random", "identity"):
            raise ConfigurationError("interleaver must be 'random' or 'identity'")

    def to_dict(self) -> dict:
        return asdict(self)


class Link:
    """Everything derived from a SystemConfig that the TX and RX share."""

    def __init__(self, cfg: SystemConfig):
        self.cfg = cfg
        self.code: LdpcCode = load_code(cfg.code)
        self.const: Constellation = build_constellation(cfg.M)
        n = self.code.n
        if cfg.interleaver == "identity":
            self.interleaver = Interleaver.identity(n)
        else:
            self.interleaver = Interleaver.random(n, cfg.interleaver_seed)
        self.clip = ClippingParams.from_clipping_level(cfg.psi_db, cfg.N)
        self.K = cfg.N // 2 - 1
        self.bits_per_ofdm = cfg.M * self.K
        self.n_ofdm = math.ceil(n / self.bits_per_ofdm)
        self.n_filler = self.n_ofdm * self.bits_per_ofdm - n
        self.epsilon = bandwidth_utilization(cfg.N)

    def sigma_n2(self, gamma_e_db: float | None = None) -> float:
        g = self.cfg.gamma_e_db if gamma_e_db is None else gamma_e_db
        if math.isinf(g) and g > 0:
            return 0.0
        return noise_variance(g, self.clip.p_e, self.epsilon, self.cfg.M, self.code.rate)


class TxBatch(NamedTuple):
    messages: np.ndarray     # (B, k)
    codewords: np.ndarray    # (B, n)
    filler: np.ndarray       # (B, n_filler)
    symbol_indices: np.ndarray  # (B, n_ofdm, K) constellation label indices
    symbols: np.ndarray      # (B, n_ofdm, K)
    time_signal: np.ndarray  # (B, n_ofdm, N) biased and clipped


def frame_source(seed: int, frame_index: int) -> RandomSource:
    return RandomSource(seed).stream("frames").child(frame_index)


def random_messages(link: Link, frame_ids, seed: int) -> np.ndarray:
    return np.stack([frame_source(seed, f).stream("bits").bits(link.code.k) for f in frame_ids])


def tx_frames(messages, link: Link, frame_ids, seed: int) -> TxBatch:
    """Encode, interleave, map, frame, IFFT and clip a batch of messages."""
    msgs = np.atleast_2d(np.asarray(messages))
    if msgs.shape[-1] != link.code.k:
        raise ValueError(f"message length {msgs.shape[-1]} != k = {link.code.k}")
    B = msgs.shape[0]
    cw = encode(msgs, link.code)
    stream = interleave(cw, link.interleaver)
    filler = np.stack([frame_source(seed, f).stream("filler").bits(link.n_filler) for f in frame_ids])
    filler = filler.reshape(B, link.n_filler)
    bits = np.concatenate((stream, filler), axis=1).reshape(B, link.n_ofdm, link.bits_per_ofdm)
    idx = bits_to_indices(bits, link.const)
    sym = link.const.points[idx]
    t = to_time(frame_subcarriers(sym, link.cfg.N))
    return TxBatch(msgs, cw, filler, idx, sym, bias_and_clip(t, link.clip))


def tx_frame(message, cfg: SystemConfig, rng_seed: int = 1, frame_index: int = 0, link: Link | None = None) -> TxBatch:
    """Single-frame transmitter; returns a TxBatch with batch size 1."""
    link = link or Link(cfg)
    return tx_frames(np.asarray(message)[None], link, [frame_index], rng_seed)


def channel_frames(tx: TxBatch, link: Link, frame_ids, seed: int, sigma_n2: float) -> SubcarrierObservation:
    """AWGN in the time domain, FFT, and data-subcarrier extraction."""
    x = tx.time_signal
    if sigma_n2 > 0:
        noise = np.stack([
            frame_source(seed, f).stream("noise").normal(x.shape[1:], math.sqrt(sigma_n2)) for f in frame_ids
        ])
        x = x + noise
    return receive_subcarriers(x, link.cfg.N, max(sigma_n2, VAR_FLOOR))


# --------------------------------------------------------------------------
# receivers


@dataclass
class RxOutput:
    """Decoder outputs for a batch of frames."""

    decoded: np.ndarray      # (B, k) message estimates
    codewords: np.ndarray    # (B, n) hard decisions
    converged: np.ndarray    # (B,)
    bp_iterations: np.ndarray  # (B,) summed over outer iterations
    outer_iterations: np.ndarray  # (B,)
    llr_stats: dict = field(default_factory=dict)


def _symbol_llrs_to_codeword(llr_sym: np.ndarray, link: Link) -> np.ndarray:
    """(B, n_ofdm, K, M) demapper LLRs -> deinterleaved codeword LLRs (B, n)."""
    B = llr_sym.shape[0]
    stream = llr_sym.reshape(B, -1)[:, :link.code.n]
    return deinterleave(stream, link.interleaver)


def _llr_stats(llr: np.ndarray) -> dict:
    a = np.abs(llr)
    return {"mean_abs": float(a.mean()), "saturated": float(np.mean(a >= LLR_MAX - 1e-9))}


def _decode(llr_cw: np.ndarray, link: Link):
    return decode_bp(llr_cw, link.code, link.cfg.bp_max_iter)


def _result(bp, link: Link, stats: dict, outer=None) -> RxOutput:
    B = bp.bits.shape[0]
    outer = np.ones(B, dtype=np.int64) if outer is None else outer
    return RxOutput(ldpc.extract_message(bp.bits, link.code), bp.bits, bp.converged,
                    bp.iterations, outer, stats)


def rx_map_bicm(obs: SubcarrierObservation, link: Link) -> RxOutput:
    """Gaussian MAP demapper on Y = alpha S + noise (mode B adds the distortion power)."""
    dvar = link.clip.sigma_d2 if link.cfg.map_mode == "B" else 0.0
    L = demap_gaussian(obs.y, obs.sigma_n2, link.clip.alpha, link.const, distortion_var=dvar)
    llr = _symbol_llrs_to_codeword(L, link)
    return _result(_decode(llr, link), link, {"demapper": _llr_stats(llr)})


def _check_net(net: NeuralNet, link: Link, n_inputs: int, name: str) -> None:
    if net is None:
        raise ConfigurationError(f"receiver needs {name}")
    if net.n_outputs != link.const.order:
        raise ConfigurationError(f"{name} has {net.n_outputs} outputs, constellation has {link.const.order} points")
    if net.n_inputs != n_inputs:
        raise ConfigurationError(f"{name} expects {net.n_inputs} inputs, receiver supplies {n_inputs}")


def rx_nn_bicm(obs: SubcarrierObservation, link: Link, net1: NeuralNet) -> RxOutput:
    """NN likelihoods per subcarrier, bit LLRs by summing over label subsets, then BP."""
    _check_net(net1, link, 3, "net1")
    P = infer_likelihoods(net1, SubcarrierObservation(obs.y, obs.sigma_n2))
    llr = _symbol_llrs_to_codeword(demap_from_probs(P, link.const), link)
    return _result(_decode(llr, link), link, {"demapper": _llr_stats(llr)})


def feedback_priors(extrinsic: np.ndarray, filler: np.ndarray, link: Link):
    """Decoder extrinsic LLRs (B, n) -> per-subcarrier bit priors and symbol PMFs.

    Filler bits are known, so they enter as saturated priors of their true value.
    """
    B = extrinsic.shape[0]
    stream = interleave(extrinsic, link.interleaver)
    known = (2.0 * np.asarray(filler, dtype=float) - 1.0) * LLR_MAX
    La = np.concatenate((stream, known.reshape(B, -1)), axis=1)
    La = La.reshape(B, link.n_ofdm, link.K, link.cfg.M)
    return La, prior_pmf_from_llrs(La, link.const)


def rx_nn_bicm_id(obs: SubcarrierObservation, link: Link, net1: NeuralNet, net2: NeuralNet | None,
                  filler: np.ndarray, iterations: int | None = None, divide_prior: bool = False) -> RxOutput:
    """Stacked NN BICM-ID.

    Iteration 1 is the NN-BICM receiver.  Later iterations feed the decoder's
    extrinsic LLRs back as symbol priors into net2 and demap with the
    extrinsic rule; BP restarts from fresh messages each time.  Frames stop
    iterating once their decoder converges.  With ``divide_prior`` the net2
    posterior is divided by the prior PMF before demapping.
    """
    iterations = link.cfg.id_iterations if iterations is None else iterations
    _check_net(net1, link, 3, "net1")
    if iterations >= 2:
        _check_net(net2, link, 3 + link.const.order, "net2")
    P = infer_likelihoods(net1, SubcarrierObservation(obs.y, obs.sigma_n2))
    llr = _symbol_llrs_to_codeword(demap_from_probs(P, link.const), link)
    bp = _decode(llr, link)
    stats = {"iter1": _llr_stats(llr)}
    bits, conv, iters = bp.bits.copy(), np.array(bp.converged), bp.iterations.copy()
    ext = bp.extrinsic
    outer = np.ones(len(conv), dtype=np.int64)
    for it in range(2, iterations + 1):
        todo = np.flatnonzero(~conv)
        if todo.size == 0:
            break
        La, pmf = feedback_priors(ext[todo], np.asarray(filler)[todo], link)
        sub = SubcarrierObservation(obs.y[todo], obs.sigma_n2, pmf)
        P2 = infer_likelihoods(net2, sub)
        if divide_prior:
            P2 = P2 / np.maximum(pmf, 1e-12)
            P2 /= P2.sum(axis=-1, keepdims=True)
        llr = _symbol_llrs_to_codeword(demap_extrinsic(P2, La, link.const), link)
        stats[f"iter{it}"] = _llr_stats(llr)
        bp2 = _decode(llr, link)
        bits[todo] = bp2.bits
        conv[todo] = bp2.converged
        iters[todo] += bp2.iterations
        outer[todo] = it
        ext = ext.copy()
        ext[todo] = bp2.extrinsic
    return RxOutput(ldpc.extract_message(bits, link.code), bits, conv, iters, outer, stats)


# --------------------------------------------------------------------------
# Monte-Carlo BER


@dataclass
class BerPoint:
    gamma_e_db: float
    receiver: str
    bit_errors: int
    bits: int
    frame_errors: int
    frames: int
    mean_bp_iters: float
    seed: int

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else 0.0

    @property
    def fer(self) -> float:
        return self.frame_errors / self.frames if self.frames else 0.0

    @property
    def ci(self) -> tuple[float, float]:
        return wilson_interval(self.bit_errors, self.bits)

    def overlaps(self, other: "BerPoint") -> bool:
        lo1, hi1 = self.ci
        lo2, hi2 = other.ci
        return not (hi1 < lo2 or hi2 < lo1)


def wilson_interval(errors: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    ci = binomtest(int(errors), int(trials)).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def aggregate(bit_errors, bits_per_frame: int, iterations, gamma_e_db: float, receiver: str, seed: int) -> BerPoint:
    """Reduce per-frame integer error counts to a BerPoint (order-independent)."""
    be = np.asarray(bit_errors, dtype=np.int64)
    return BerPoint(gamma_e_db, receiver, int(be.sum()), int(bits_per_frame * be.size),
                    int(np.count_nonzero(be)), int(be.size), float(np.mean(iterations)) if be.size else 0.0, seed)


def simulate_batch(link: Link, frame_ids, seed: int, sigma_n2: float, receivers: dict):
    """Run one batch of frames through the channel and every requested receiver."""
    msgs = random_messages(link, frame_ids, seed)
    tx = tx_frames(msgs, link, frame_ids, seed)
    obs = channel_frames(tx, link, frame_ids, seed, sigma_n2)
    out = {}
    for name, fn in receivers.items():
        rx = fn(obs, tx)
        out[name] = (np.count_nonzero(rx.decoded != msgs, axis=1), rx.bp_iterations)
    return out


def make_receiver(cfg: SystemConfig, link: Link, net1=None, net2=None, receiver: str | None = None,
                  divide_prior: bool = False):
    receiver = receiver or cfg.receiver
    if receiver == "map":
        return lambda obs, tx: rx_map_bicm(obs, link)
    if receiver == "nn":
        _check_net(net1, link, 3, "net1")
        return lambda obs, tx: rx_nn_bicm(obs, link, net1)
    if receiver == "nn-id":
        _check_net(net1, link, 3, "net1")
        if cfg.id_iterations >= 2:
            _check_net(net2, link, 3 + link.const.order, "net2")
        return lambda obs, tx: rx_nn_bicm_id(obs, link, net1, net2, tx.filler, divide_prior=divide_prior)
    raise ConfigurationError(f"unknown receiver {receiver!r}")


def _batch_job(args):
    cfg, net1, net2, names, divide_prior, ids, s2 = args
    link = Link(cfg)
    rx = {r: make_receiver(cfg, link, net1, net2, r, divide_prior) for r in names}
    return simulate_batch(link, ids, cfg.seed, s2, rx)


def run_ber_points(cfg: SystemConfig, frames: int, receivers: dict, gamma_e_db: float | None = None,
                   batch_size: int = 100, link: Link | None = None) -> dict:
    """Monte-Carlo BER for several receivers on the same frames and channel draws.

    ``receivers`` maps a label to a callable (obs, tx) -> RxOutput.
    """
    if frames < 1:
        raise ValueError("frames must be >= 1")
    link = link or Link(cfg)
    g = cfg.gamma_e_db if gamma_e_db is None else gamma_e_db
    s2 = link.sigma_n2(g)
    batches = (simulate_batch(link, ids, cfg.seed, s2, receivers) for ids in _batches(frames, batch_size))
    return _collect(batches, list(receivers), link, g, cfg.seed)


def run_named_receivers(cfg: SystemConfig, frames: int, names, net1=None, net2=None, gamma_e_db: float | None = None,
                        batch_size: int = 100, workers: int = 1, divide_prior: bool = False) -> dict:
    """Like run_ber_points for receivers given by name; batches may run in worker processes.

    Results do not depend on ``workers`` or ``batch_size``: every frame owns its
    random streams and the error counts are integers.
    """
    if frames < 1:
        raise ValueError("frames must be >= 1")
    link = Link(cfg)
    for r in names:
        make_receiver(cfg, link, net1, net2, r, divide_prior)  # fail fast on missing models
    g = cfg.gamma_e_db if gamma_e_db is None else gamma_e_db
    jobs = [(cfg, net1, net2, tuple(names), divide_prior, ids, link.sigma_n2(g))
            for ids in _batches(frames, batch_size)]
    if workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_batch_job, jobs))
    else:
        results = map(_batch_job, jobs)
    return _collect(results, list(names), link, g, cfg.seed)


def _batches(frames: int, batch_size: int):
    for start in range(0, frames, batch_size):
        yield list(range(start, min(frames, start + batch_size)))


def _collect(batch_results, names, link: Link, g: float, seed: int) -> dict:
    errs = {r: [] for r in names}
    iters = {r: [] for r in names}
    for res in batch_results:
        for r, (e, it) in res.items():
            errs[r].append(e)
            iters[r].append(it)
    return {r: aggregate(np.concatenate(errs[r]), link.code.k, np.concatenate(iters[r]), g, r, seed)
            for r in names}


def run_ber_point(cfg: SystemConfig, frames: int, net1=None, net2=None, batch_size: int = 100,
                  gamma_e_db: float | None = None) -> BerPoint:
    link = Link(cfg)
    rx = make_receiver(cfg, link, net1, net2)
    return run_ber_points(cfg, frames, {cfg.receiver: rx}, gamma_e_db, batch_size, link)[cfg.receiver]


def with_gamma(cfg: SystemConfig, gamma_e_db: float) -> SystemConfig:
    return replace(cfg, gamma_e_db=gamma_e_db)
