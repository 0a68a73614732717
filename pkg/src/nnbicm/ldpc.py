"""LDPC codes in alist form: loading, GF(2) encoding and sum-product decoding.

LLRs follow L = log p(bit=1)/p(bit=0) throughout: a positive LLR favours 1.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import numpy as np

LLR_MAX = 30.0

BUNDLED_CODES = {
    "80211n-1296": "80211n_1296_r12.alist",
    "80211n-1944": "80211n_1944_r12.alist",
    "hamming-7-4": "hamming_7_4.alist",
}


class AlistError(ValueError):
    """Malformed or inconsistent alist input."""


@dataclass(frozen=True, eq=False)
class LdpcCode:
    """Binary linear code given by a sparse parity-check matrix.

    ``info_positions`` are the codeword positions that carry the message
    bits in order; the remaining positions are parity computed through
    ``parity_map``.  Rows of the original H that were linearly dependent are
    listed in ``dropped_rows``; they are kept in ``H`` for decoding.
    """

    n: int
    k: int
    H: np.ndarray
    info_positions: np.ndarray
    parity_positions: np.ndarray
    parity_map: np.ndarray
    dropped_rows: tuple[int, ...] = ()
    name: str = ""
    graph: "TannerGraph" = field(repr=False, default=None)

    @property
    def m(self) -> int:
        return self.H.shape[0]

    @property
    def rate(self) -> float:
        return self.k / self.n

    def syndrome(self, codewords) -> np.ndarray:
        c = np.asarray(codewords, dtype=np.int64)
        return (c @ self.H.T.astype(np.int64)) % 2


class TannerGraph:
    """Edge lists of H padded into rectangular index tables for vectorized BP."""

    def __init__(self, H: np.ndarray):
        checks, variables = np.nonzero(H)  # row-major => edges sorted by check
        self.n_edges = len(checks)
        self.edge_check = checks
        self.edge_var = variables
        m, n = H.shape
        pad = self.n_edges
        dc = np.bincount(checks, minlength=m)
        dv = np.bincount(variables, minlength=n)
        self.check_edges = np.full((m, dc.max()), pad, dtype=np.int64)
        self.var_edges = np.full((n, dv.max()), pad, dtype=np.int64)
        slot_c = np.arange(self.n_edges) - np.repeat(np.cumsum(dc) - dc, dc)
        self.check_edges[checks, slot_c] = np.arange(self.n_edges)
        order = np.argsort(variables, kind="stable")
        slot_v = np.arange(self.n_edges) - np.repeat(np.cumsum(dv) - dv, dv)
        self.var_edges[variables[order], slot_v] = order
        self.check_mask = self.check_edges < pad


# --------------------------------------------------------------------------
# alist I/O


def _ints(line: str, lineno: int) -> list[int]:
    try:
        return [int(tok) for tok in line.split()]
    except ValueError as exc:
        raise AlistError(f"line {lineno}: non-integer token ({exc})") from None


def parse_alist(text: str) -> np.ndarray:
    """Parse alist text into a dense 0/1 parity-check matrix (m x n)."""
    lines = [(i + 1, ln) for i, ln in enumerate(text.splitlines()) if ln.strip()]
    if len(lines) < 4:
        raise AlistError("alist header incomplete: need at least 4 lines")
    (l1, h1), (l2, h2), (l3, h3), (l4, h4) = lines[:4]
    dims = _ints(h1, l1)
    if len(dims) != 2 or min(dims) < 1:
        raise AlistError(f"line {l1}: expected 'n m' with positive sizes")
    n, m = dims
    maxes = _ints(h2, l2)
    if len(maxes) != 2:
        raise AlistError(f"line {l2}: expected max column and row degree")
    col_deg = _ints(h3, l3)
    row_deg = _ints(h4, l4)
    if len(col_deg) != n:
        raise AlistError(f"line {l3}: expected {n} column degrees, got {len(col_deg)}")
    if len(row_deg) != m:
        raise AlistError(f"line {l4}: expected {m} row degrees, got {len(row_deg)}")
    if max(col_deg) > maxes[0] or max(row_deg) > maxes[1]:
        raise AlistError(f"line {l2}: degree list exceeds declared maximum")
    body = lines[4:]
    if len(body) < n:
        raise AlistError(f"column list truncated: column {len(body) + 1} of {n} missing")

    H = np.zeros((m, n), dtype=np.uint8)
    for j in range(n):
        lineno, ln = body[j]
        idx = [v for v in _ints(ln, lineno) if v != 0]
        if len(idx) != col_deg[j]:
            raise AlistError(
                f"line {lineno}: column {j + 1} lists {len(idx)} rows, degree says {col_deg[j]}"
            )
        for r in idx:
            if not 1 <= r <= m:
                raise AlistError(f"line {lineno}: column {j + 1} has row index {r} out of range")
            H[r - 1, j] = 1

    rows = body[n:]
    if rows:
        if len(rows) < m:
            raise AlistError(f"row list truncated: row {len(rows) + 1} of {m} missing")
        for i in range(m):
            lineno, ln = rows[i]
            idx = sorted(v for v in _ints(ln, lineno) if v != 0)
            if len(idx) != row_deg[i]:
                raise AlistError(
                    f"line {lineno}: row {i + 1} lists {len(idx)} columns, degree says {row_deg[i]}"
                )
            if idx != (np.flatnonzero(H[i]) + 1).tolist():
                raise AlistError(f"line {lineno}: row {i + 1} disagrees with the column lists")
    if not np.array_equal(H.sum(axis=1), row_deg):
        bad = int(np.flatnonzero(H.sum(axis=1) != row_deg)[0])
        raise AlistError(f"row {bad + 1}: degree inconsistent with column lists")
    return H


def format_alist(H: np.ndarray) -> str:
    H = np.asarray(H) != 0
    m, n = H.shape
    col_deg = H.sum(axis=0)
    row_deg = H.sum(axis=1)
    out = [f"{n} {m}", f"{col_deg.max()} {row_deg.max()}",
           " ".join(map(str, col_deg)), " ".join(map(str, row_deg))]
    for j in range(n):
        idx = (np.flatnonzero(H[:, j]) + 1).tolist()
        idx += [0] * (col_deg.max() - len(idx))
        out.append(" ".join(map(str, idx)))
    for i in range(m):
        idx = (np.flatnonzero(H[i]) + 1).tolist()
        idx += [0] * (row_deg.max() - len(idx))
        out.append(" ".join(map(str, idx)))
    return "\n".join(out) + "\n"


def expand_prototype(proto, z: int) -> np.ndarray:
    """Expand a quasi-cyclic base matrix (-1 = zero block, s = identity shifted by s)."""
    proto = np.asarray(proto)
    rb, cb = proto.shape
    H = np.zeros((rb * z, cb * z), dtype=np.uint8)
    eye = np.eye(z, dtype=np.uint8)
    for r in range(rb):
        for c in range(cb):
            s = int(proto[r, c])
            if s >= 0:
                H[r * z:(r + 1) * z, c * z:(c + 1) * z] = np.roll(eye, s, axis=1)
    return H


# --------------------------------------------------------------------------
# code construction


def _gf2_rref(H: np.ndarray):
    """Reduced row echelon form over GF(2). Returns (R, pivot_cols, pivot_rows)."""
    A = (np.asarray(H) & 1).astype(bool).copy()
    m, n = A.shape
    row_of = np.arange(m)
    pivots = []
    r = 0
    for c in range(n):
        if r == m:
            break
        hits = np.flatnonzero(A[r:, c])
        if hits.size == 0:
            continue
        p = r + hits[0]
        if p != r:
            A[[r, p]] = A[[p, r]]
            row_of[[r, p]] = row_of[[p, r]]
        others = np.flatnonzero(A[:, c])
        others = others[others != r]
        A[others] ^= A[r]
        pivots.append(c)
        r += 1
    return A[:r], np.array(pivots, dtype=np.int64), row_of[:r]


def build_code(H, name: str = "") -> LdpcCode:
    H = (np.asarray(H) != 0).astype(np.uint8)
    m, n = H.shape
    R, pivots, kept = _gf2_rref(H)
    rank = len(pivots)
    dropped = tuple(sorted(set(range(m)) - set(kept.tolist())))
    info = np.setdiff1d(np.arange(n), pivots)
    parity_map = R[:, info].astype(np.uint8)  # rank x k
    return LdpcCode(
        n=n, k=n - rank, H=H, info_positions=info, parity_positions=pivots,
        parity_map=parity_map, dropped_rows=dropped, name=name, graph=TannerGraph(H),
    )


def load_code(source) -> LdpcCode:
    """Load a code from alist text, a file path, or a bundled code id."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        return _load_code_cached(str(source))
    return build_code(parse_alist(source))


@functools.lru_cache(maxsize=8)
def _load_code_cached(ref: str) -> LdpcCode:
    if ref in BUNDLED_CODES:
        text = resources.files("nnbicm.codes").joinpath(BUNDLED_CODES[ref]).read_text()
        name = ref
    else:
        path = Path(ref)
        if not path.is_file():
            raise FileNotFoundError(f"LDPC code file not found: {path}")
        text = path.read_text()
        name = path.stem
    try:
        return build_code(parse_alist(text), name=name)
    except AlistError as exc:
        raise AlistError(f"{ref}: {exc}") from None


def encode(message, code: LdpcCode) -> np.ndarray:
    """Encode one message (k,) or a batch (B, k) into codewords."""
    msg = np.asarray(message)
    if msg.shape[-1] != code.k:
        raise ValueError(f"message length {msg.shape[-1]} != k = {code.k}")
    msg = msg.astype(np.int64) & 1
    cw = np.zeros(msg.shape[:-1] + (code.n,), dtype=np.int8)
    cw[..., code.info_positions] = msg
    cw[..., code.parity_positions] = (msg @ code.parity_map.T.astype(np.int64)) % 2
    return cw


def extract_message(codeword, code: LdpcCode) -> np.ndarray:
    return np.asarray(codeword)[..., code.info_positions]


# --------------------------------------------------------------------------
# decoding


class BpResult(NamedTuple):
    bits: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray
    extrinsic: np.ndarray


def decode_bp(llr, code: LdpcCode, max_iter: int = 50) -> BpResult:
    """Flooding sum-product decoding with the exact tanh check-node rule.

    Accepts one LLR vector (n,) or a batch (B, n); each frame stops as soon
    as its hard decision satisfies every check.  ``extrinsic`` is the
    posterior minus the channel LLR, clamped to +-LLR_MAX.
    """
    llr = np.asarray(llr, dtype=float)
    single = llr.ndim == 1
    L = np.atleast_2d(llr)
    if L.shape[-1] != code.n:
        raise ValueError(f"LLR length {L.shape[-1]} != n = {code.n}")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    L = np.clip(np.nan_to_num(L, posinf=LLR_MAX, neginf=-LLR_MAX), -LLR_MAX, LLR_MAX)
    g = code.graph
    B = L.shape[0]
    E = g.n_edges

    bits = np.zeros((B, code.n), dtype=np.int8)
    post_all = L.copy()
    converged = np.zeros(B, dtype=bool)
    iters = np.full(B, max_iter, dtype=np.int64)

    active = np.arange(B)
    Lact = L
    c2v = np.zeros((B, E + 1))  # trailing column pads ragged degree tables
    for it in range(1, max_iter + 1):
        post = Lact + c2v[:, g.var_edges].sum(axis=-1)
        v2c = np.clip(post[:, g.edge_var] - c2v[:, :E], -LLR_MAX, LLR_MAX)
        t = np.ones((len(active), E + 1))
        # tanh(-L/2) = p0 - p1 under the log p1/p0 convention
        t[:, :E] = np.tanh(-0.5 * v2c)
        T = t[:, g.check_edges]
        left = np.cumprod(np.concatenate((np.ones(T.shape[:-1] + (1,)), T[..., :-1]), axis=-1), axis=-1)
        right = np.cumprod(np.concatenate((np.ones(T.shape[:-1] + (1,)), T[..., ::-1][..., :-1]), axis=-1), axis=-1)[..., ::-1]
        excl = np.clip(left * right, -1.0 + 1e-15, 1.0 - 1e-15)
        c2v[:, :E] = (-2.0 * np.arctanh(excl))[:, g.check_mask]

        post = Lact + c2v[:, g.var_edges].sum(axis=-1)
        hard = (post > 0).astype(np.int8)
        parity = hard[:, g.edge_var]
        parity = np.concatenate((parity, np.zeros((len(active), 1), dtype=np.int8)), axis=1)
        ok = ~(parity[:, g.check_edges].sum(axis=-1) % 2).astype(bool).any(axis=-1)

        done = ok | (it == max_iter)
        if done.any():
            idx = active[done]
            bits[idx] = hard[done]
            post_all[idx] = post[done]
            converged[idx] = ok[done]
            iters[idx] = it
            keep = ~done
            active = active[keep]
            Lact = Lact[keep]
            c2v = c2v[keep]
        if active.size == 0:
            break

    extrinsic = np.clip(post_all - L, -LLR_MAX, LLR_MAX)
    if single:
        return BpResult(bits[0], bool(converged[0]), int(iters[0]), extrinsic[0])
    return BpResult(bits, converged, iters, extrinsic)


def decode_ml(llr, code: LdpcCode) -> np.ndarray:
    """Exhaustive maximum-likelihood decoding; only sensible for tiny codes."""
    llr = np.asarray(llr, dtype=float)
    single = llr.ndim == 1
    msgs = ((np.arange(2 ** code.k)[:, None] >> np.arange(code.k)[::-1]) & 1)
    book = encode(msgs, code)
    # log p(c | llr) up to a constant is sum of c_i * L_i
    scores = np.atleast_2d(llr) @ book.T.astype(float)
    best = book[np.argmax(scores, axis=1)]
    return best[0] if single else best
