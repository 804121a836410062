"""Bit-parallel gate-network simulation.

Each uint64 word packs 64 consecutive input assignments; assignment ``t``
sets input ``i`` to bit ``i`` of ``t``. Two implementations share one
interface: numba-compiled loops (default) and plain numpy. Set
``OPTIMULT_NO_NUMBA=1`` to force numpy.
"""
from __future__ import annotations

import os

import numpy as np

AND, OR, XOR, NOT = 0, 1, 2, 3
OPCODES = {"and": AND, "or": OR, "xor": XOR, "not": NOT}

# assignment-bit patterns for the first six inputs within one word
_LOW = np.array([
    0xAAAAAAAAAAAAAAAA, 0xCCCCCCCCCCCCCCCC, 0xF0F0F0F0F0F0F0F0,
    0xFF00FF00FF00FF00, 0xFFFF0000FFFF0000, 0xFFFFFFFF00000000,
], dtype=np.uint64)
_ONES = np.uint64(0xFFFFFFFFFFFFFFFF)


def _numba_wanted() -> bool:
    if os.environ.get("OPTIMULT_NO_NUMBA", "") not in ("", "0"):
        return False
    return os.environ.get("OPTIMULT_NUMBA", "1") != "0"


try:
    if not _numba_wanted():
        raise ImportError
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    HAVE_NUMBA = False


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"


# numpy implementation

def input_words_np(n_inputs: int, words: np.ndarray) -> np.ndarray:
    out = np.empty((n_inputs, len(words)), dtype=np.uint64)
    for i in range(n_inputs):
        if i < 6:
            out[i] = _LOW[i]
        else:
            out[i] = np.where((words >> (i - 6)) & 1, _ONES, np.uint64(0))
    return out


def simulate_np(ops, a, b, n_inputs, words):
    """Values of every signal over the given word indices -> (signals, words)."""
    words = np.asarray(words, dtype=np.int64)
    n_sig = 2 + n_inputs + len(ops)
    vals = np.empty((n_sig, len(words)), dtype=np.uint64)
    vals[0] = 0
    vals[1] = _ONES
    vals[2:2 + n_inputs] = input_words_np(n_inputs, words)
    base = 2 + n_inputs
    for k in range(len(ops)):
        op = ops[k]
        x = vals[a[k]]
        if op == AND:
            vals[base + k] = x & vals[b[k]]
        elif op == OR:
            vals[base + k] = x | vals[b[k]]
        elif op == XOR:
            vals[base + k] = x ^ vals[b[k]]
        else:
            vals[base + k] = ~x
    return vals


def output_values_np(vals, outs, words, n_cases):
    """Integer output per assignment for the given words."""
    j = np.arange(64, dtype=np.uint64)
    acc = np.zeros((len(words), 64), dtype=np.int64)
    for k, s in enumerate(outs):
        bits = ((vals[s][:, None] >> j) & np.uint64(1)).astype(np.int64)
        acc |= bits << k
    acc = acc.reshape(-1)
    t = (np.asarray(words, dtype=np.int64)[:, None] * 64 + np.arange(64)).reshape(-1)
    keep = t < n_cases
    return t[keep], acc[keep]


def first_mismatch_np(ops, a, b, outs, n, square, chunk=1024):
    n_inputs = n if square else 2 * n
    n_cases = 1 << n_inputs
    n_words = (n_cases + 63) // 64
    mask = (1 << n) - 1
    for lo in range(0, n_words, chunk):
        words = np.arange(lo, min(lo + chunk, n_words), dtype=np.int64)
        vals = simulate_np(ops, a, b, n_inputs, words)
        t, got = output_values_np(vals, outs, words, n_cases)
        pv = t & mask
        qv = pv if square else t >> n
        bad = np.nonzero(got != pv * qv)[0]
        if len(bad):
            return int(t[bad[0]])
    return -1


# numba implementation

if HAVE_NUMBA:
    @njit(cache=True)
    def _sim_word(ops, a, b, n_inputs, w, vals):
        vals[0] = 0
        vals[1] = 0xFFFFFFFFFFFFFFFF
        for i in range(n_inputs):
            if i < 6:
                vals[2 + i] = _LOW_NB[i]
            elif (w >> (i - 6)) & 1:
                vals[2 + i] = 0xFFFFFFFFFFFFFFFF
            else:
                vals[2 + i] = 0
        base = 2 + n_inputs
        for k in range(ops.shape[0]):
            op = ops[k]
            x = vals[a[k]]
            if op == 0:
                vals[base + k] = x & vals[b[k]]
            elif op == 1:
                vals[base + k] = x | vals[b[k]]
            elif op == 2:
                vals[base + k] = x ^ vals[b[k]]
            else:
                vals[base + k] = ~x

    _LOW_NB = _LOW.copy()

    @njit(cache=True)
    def _first_mismatch_nb(ops, a, b, outs, n, square):
        n_inputs = n if square else 2 * n
        n_cases = 1 << n_inputs
        n_words = (n_cases + 63) // 64
        mask = (1 << n) - 1
        vals = np.empty(2 + n_inputs + ops.shape[0], dtype=np.uint64)
        for w in range(n_words):
            _sim_word(ops, a, b, n_inputs, w, vals)
            for j in range(64):
                t = w * 64 + j
                if t >= n_cases:
                    break
                got = 0
                for k in range(outs.shape[0]):
                    got |= np.int64((vals[outs[k]] >> np.uint64(j)) & np.uint64(1)) << k
                pv = t & mask
                qv = pv if square else t >> n
                if got != pv * qv:
                    return t
        return -1

    @njit(cache=True)
    def _simulate_nb(ops, a, b, n_inputs, words):
        # gate-major so every write is a contiguous row
        n_w = words.shape[0]
        n_sig = 2 + n_inputs + ops.shape[0]
        out = np.empty((n_sig, n_w), dtype=np.uint64)
        for i in range(n_w):
            w = words[i]
            out[0, i] = 0
            out[1, i] = 0xFFFFFFFFFFFFFFFF
            for j in range(n_inputs):
                if j < 6:
                    out[2 + j, i] = _LOW_NB[j]
                elif (w >> (j - 6)) & 1:
                    out[2 + j, i] = 0xFFFFFFFFFFFFFFFF
                else:
                    out[2 + j, i] = 0
        base = 2 + n_inputs
        for k in range(ops.shape[0]):
            op = ops[k]
            x = out[a[k]]
            y = out[b[k]]
            r = out[base + k]
            for i in range(n_w):
                if op == 0:
                    r[i] = x[i] & y[i]
                elif op == 1:
                    r[i] = x[i] | y[i]
                elif op == 2:
                    r[i] = x[i] ^ y[i]
                else:
                    r[i] = ~x[i]
        return out


def simulate(ops, a, b, n_inputs, words, use_numba: bool | None = None):
    use = HAVE_NUMBA if use_numba is None else (use_numba and HAVE_NUMBA)
    words = np.asarray(words, dtype=np.int64)
    if use:
        return _simulate_nb(ops, a, b, n_inputs, words)
    return simulate_np(ops, a, b, n_inputs, words)


def first_mismatch(ops, a, b, outs, n: int, square: bool, use_numba: bool | None = None) -> int:
    """First assignment index (lexicographic) whose outputs differ from the
    product, or -1."""
    use = HAVE_NUMBA if use_numba is None else (use_numba and HAVE_NUMBA)
    if use:
        return int(_first_mismatch_nb(ops, a, b, outs, n, square))
    return first_mismatch_np(ops, a, b, outs, n, square)
