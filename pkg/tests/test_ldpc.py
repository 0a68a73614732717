import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nnbicm.ldpc import (
    LLR_MAX, AlistError, build_code, decode_bp, decode_ml, encode, expand_prototype, extract_message,
    format_alist, load_code, parse_alist,
)
from oracles import bpsk_llrs, gf2_syndrome

HAMMING_H = np.array([[1, 1, 0, 1, 1, 0, 0],
                      [1, 0, 1, 1, 0, 1, 0],
                      [0, 1, 1, 1, 0, 0, 1]])


# ---------------------------------------------------------------- loading

@pytest.mark.parametrize("name,n,k,edges", [("80211n-1296", 1296, 648, 4644), ("80211n-1944", 1944, 972, 6966)])
def test_bundled_80211n_codes(name, n, k, edges):
    code = load_code(name)
    assert (code.n, code.k, code.m) == (n, k, n - k)
    assert code.rate == 0.5
    assert int(code.H.sum()) == edges
    assert not code.dropped_rows


def test_toy_code(toy_code):
    assert (toy_code.n, toy_code.k) == (7, 4)
    assert np.array_equal(toy_code.H, HAMMING_H)


def test_alist_round_trip(toy_code):
    text = format_alist(toy_code.H)
    assert np.array_equal(parse_alist(text), toy_code.H)
    assert np.array_equal(load_code(text).H, toy_code.H)


def test_alist_from_path(tmp_path, toy_code):
    p = tmp_path / "toy.alist"
    p.write_text(format_alist(HAMMING_H))
    assert load_code(str(p)).n == 7


def test_missing_file_names_path(tmp_path):
    missing = tmp_path / "nope.alist"
    with pytest.raises(FileNotFoundError, match="nope.alist"):
        load_code(str(missing))


def test_truncated_column_list_names_column():
    lines = format_alist(HAMMING_H).splitlines()
    text = "\n".join(lines[:4 + 5])  # only 5 of 7 column lines, no row lists
    with pytest.raises(AlistError, match="column 6"):
        parse_alist(text)


def test_short_column_line_names_column():
    lines = format_alist(HAMMING_H).splitlines()
    lines[4 + 2] = lines[4 + 2].split()[0]
    with pytest.raises(AlistError, match="column 3"):
        parse_alist("\n".join(lines))


def test_inconsistent_row_list():
    lines = format_alist(HAMMING_H).splitlines()
    lines[-1] = "1 2 3 7"
    with pytest.raises(AlistError, match="row 3"):
        parse_alist("\n".join(lines))


def test_bad_header():
    with pytest.raises(AlistError):
        parse_alist("7\n")
    with pytest.raises(AlistError, match="line 1"):
        parse_alist("a b\n1 1\n1\n1\n")


def test_dependent_rows_are_dropped():
    H = np.vstack([HAMMING_H, HAMMING_H[0] ^ HAMMING_H[1]])
    code = build_code(H)
    assert code.k == 4
    assert len(code.dropped_rows) == 1


def test_expand_prototype_circulants():
    H = expand_prototype([[0, -1], [1, 2]], 3)
    assert H.shape == (6, 6)
    assert np.array_equal(H[:3, :3], np.eye(3, dtype=H.dtype))
    assert not H[:3, 3:].any()
    assert np.array_equal(H[3:, :3], np.roll(np.eye(3, dtype=H.dtype), 1, axis=1))


# ---------------------------------------------------------------- encoding

def test_zero_message_gives_zero_codeword():
    code = load_code("80211n-1296")
    assert not encode(np.zeros(code.k, dtype=np.int8), code).any()


def test_toy_message_1011(toy_code):
    cw = encode([1, 0, 1, 1], toy_code)
    assert not gf2_syndrome(HAMMING_H, cw).any()
    assert np.array_equal(extract_message(cw, toy_code), [1, 0, 1, 1])
    # the 16 codewords are exactly the null space of H
    words = encode(np.array(list(itertools.product([0, 1], repeat=4))), toy_code)
    null = [c for c in itertools.product([0, 1], repeat=7) if not gf2_syndrome(HAMMING_H, c).any()]
    assert sorted(map(tuple, words.tolist())) == sorted(null)


@pytest.mark.parametrize("name", ["80211n-1296", "80211n-1944"])
def test_encode_fuzz_satisfies_checks(name, rng):
    code = load_code(name)
    msgs = rng.integers(0, 2, size=(10_000 if name.endswith("1296") else 2000, code.k))
    cws = encode(msgs, code)
    assert not gf2_syndrome(code.H, cws).any()
    assert np.array_equal(extract_message(cws, code), msgs)


@given(st.lists(st.integers(0, 1), min_size=4, max_size=4))
def test_encode_property_toy(msg):
    code = load_code("hamming-7-4")
    assert not gf2_syndrome(HAMMING_H, encode(msg, code)).any()


def test_encode_length_mismatch(toy_code):
    with pytest.raises(ValueError):
        encode([1, 0, 1], toy_code)


# ---------------------------------------------------------------- decoding

def test_bp_noiseless_converges_in_one_iteration(rng):
    code = load_code("80211n-1296")
    cw = encode(rng.integers(0, 2, code.k), code)
    res = decode_bp((2.0 * cw - 1) * LLR_MAX, code)
    assert res.converged and res.iterations == 1
    assert np.array_equal(res.bits, cw)


def test_bp_all_zero_llrs_is_deterministic(toy_code):
    a = decode_bp(np.zeros(7), toy_code)
    b = decode_bp(np.zeros(7), toy_code)
    assert np.array_equal(a.bits, b.bits)
    # LLR 0 decides bit 0, and the zero word is a codeword
    assert not a.bits.any() and a.converged


def test_bp_corrects_single_weak_flip(toy_code):
    cw = encode([1, 0, 1, 1], toy_code)
    llr = (2.0 * cw - 1) * 6.0
    llr[2] = -(2.0 * cw[2] - 1) * 2.0
    res = decode_bp(llr, toy_code)
    assert np.array_equal(res.bits, cw)
    assert np.array_equal(decode_ml(llr, toy_code), cw)


def test_bp_llr_convention_positive_means_one(toy_code):
    cw = encode([0, 1, 1, 0], toy_code)
    res = decode_bp(np.where(cw == 1, 8.0, -8.0), toy_code)
    assert np.array_equal(res.bits, cw)


def test_bp_high_snr_error_free(rng):
    code = load_code("80211n-1296")
    msgs = rng.integers(0, 2, size=(1000, code.k))
    cws = encode(msgs, code)
    llr = bpsk_llrs(cws, 7.0, code.rate, rng)
    assert np.mean(np.abs(llr)) >= 10
    res = decode_bp(llr, code)
    assert res.converged.all()
    assert np.array_equal(res.bits, cws)


def test_bp_matches_ml_on_toy(rng, toy_code):
    msgs = rng.integers(0, 2, size=(10_000, 4))
    cws = encode(msgs, toy_code)
    llr = bpsk_llrs(cws, 5.0, toy_code.rate, rng)
    bp = decode_bp(llr, toy_code).bits
    ml = decode_ml(llr, toy_code)
    assert np.mean(np.all(bp == ml, axis=1)) >= 0.99


def test_bp_extrinsic_is_posterior_minus_channel(rng):
    code = load_code("80211n-1296")
    cw = encode(rng.integers(0, 2, code.k), code)
    llr = bpsk_llrs(cw, 1.5, code.rate, rng)
    res = decode_bp(llr, code, max_iter=5)
    post = llr + res.extrinsic
    # hard decisions are the sign of the posterior (ties to 0)
    agree = (post > 0) == res.bits.astype(bool)
    assert np.mean(agree[np.abs(post) < LLR_MAX - 1]) == 1.0
    assert np.all(np.abs(res.extrinsic) <= LLR_MAX)


def test_bp_adversarial_infinite_inputs(toy_code):
    llr = np.array([np.inf, -np.inf, np.nan, 1e300, -1e300, 0.0, 3.0])
    res = decode_bp(llr, toy_code)
    assert np.all(np.isfinite(res.extrinsic))


def test_bp_batch_matches_single(rng):
    code = load_code("80211n-1296")
    cws = encode(rng.integers(0, 2, size=(4, code.k)), code)
    llr = bpsk_llrs(cws, 1.2, code.rate, rng)
    batch = decode_bp(llr, code)
    for i in range(4):
        one = decode_bp(llr[i], code)
        assert np.array_equal(one.bits, batch.bits[i])
        assert one.iterations == batch.iterations[i]
        assert np.allclose(one.extrinsic, batch.extrinsic[i])


def test_bp_length_mismatch(toy_code):
    with pytest.raises(ValueError):
        decode_bp(np.zeros(6), toy_code)
