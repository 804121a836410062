import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optimult import kernels
from optimult.arrays import ArraySpec
from optimult.netlist import lower
from optimult.verify import squarer3_formulas

needs_numba = pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba disabled")


def random_network(rng, n_inputs, n_gates):
    ops = rng.integers(0, 4, n_gates).astype(np.int8)
    a = np.empty(n_gates, dtype=np.int32)
    b = np.empty(n_gates, dtype=np.int32)
    for k in range(n_gates):
        hi = 2 + n_inputs + k
        a[k] = rng.integers(0, hi)
        b[k] = rng.integers(0, hi)
    return ops, a, b


def test_input_patterns():
    words = np.arange(2, dtype=np.int64)
    vals = kernels.simulate_np(np.zeros(0, np.int8), np.zeros(0, np.int32),
                               np.zeros(0, np.int32), 7, words)
    for t in range(128):
        w, bit = divmod(t, 64)
        for i in range(7):
            assert (int(vals[2 + i, w]) >> bit) & 1 == (t >> i) & 1
    assert int(vals[0, 0]) == 0 and int(vals[1, 0]) == 2**64 - 1


@needs_numba
@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 9), st.integers(1, 40))
def test_backends_agree(seed, n_inputs, n_gates):
    rng = np.random.default_rng(seed)
    ops, a, b = random_network(rng, n_inputs, n_gates)
    words = np.arange(max(1, (1 << n_inputs) // 64), dtype=np.int64)
    x = kernels.simulate(ops, a, b, n_inputs, words, use_numba=True)
    y = kernels.simulate(ops, a, b, n_inputs, words, use_numba=False)
    assert np.array_equal(x, y)


@pytest.mark.parametrize("use_numba", [False, pytest.param(True, marks=needs_numba)])
def test_first_mismatch(use_numba):
    nl = lower(squarer3_formulas(), 3, True)
    ops, a, b, outs = nl.arrays()
    assert kernels.first_mismatch(ops, a, b, outs, 3, True, use_numba) == -1
    broken = outs.copy()
    broken[0] = 0
    assert kernels.first_mismatch(ops, a, b, broken, 3, True, use_numba) == 1


@needs_numba
def test_first_mismatch_multiplier_agrees():
    rng = np.random.default_rng(7)
    spec = ArraySpec(4)
    ops, a, b = random_network(rng, spec.n_inputs, 30)
    outs = rng.integers(0, 2 + spec.n_inputs + 30, spec.output_width).astype(np.int32)
    x = kernels.first_mismatch(ops, a, b, outs, 4, False, True)
    y = kernels.first_mismatch(ops, a, b, outs, 4, False, False)
    assert x == y


def test_backend_name():
    assert kernels.backend() in ("numba", "numpy")
