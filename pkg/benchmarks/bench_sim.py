"""Compare the numba and numpy simulation kernels on an array multiplier.

    python benchmarks/bench_sim.py [--width 8] [--repeat 5]
"""
import argparse
import time

import numpy as np

from optimult import kernels
from optimult.netlist import lower
from optimult.term import ZERO, and_, or_, p, q, xor


def array_multiplier(n):
    """Gate netlist of an n-bit ripple-carry array multiplier (a correct
    design, so the mismatch search scans every assignment)."""
    rows = [[and_(p(i), q(j)) for i in range(n)] for j in range(n)]
    acc = rows[0] + [ZERO]
    bits = [acc[0]]
    acc = acc[1:]
    for j in range(1, n):
        carry, nxt = ZERO, []
        for i in range(n):
            x, y = acc[i], rows[j][i]
            s = xor(xor(x, y), carry)
            carry = or_(and_(x, y), and_(carry, xor(x, y)))
            nxt.append(s)
        nxt.append(carry)
        bits.append(nxt[0])
        acc = nxt[1:]
    bits.extend(acc)
    return lower(bits, n, False)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--width", type=int, default=8, help="multiplier operand width")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    n = args.width
    nl = array_multiplier(n)
    ops, a, b, outs = nl.arrays()
    n_inputs = nl.n_inputs
    words = np.arange(max(1, (1 << n_inputs) // 64), dtype=np.int64)
    print(f"{n}-bit array multiplier: {len(ops)} gates, {1 << n_inputs} cases, {len(words)} words")

    t_np = best_of(lambda: kernels.simulate(ops, a, b, n_inputs, words, use_numba=False),
                   args.repeat)
    m_np = best_of(lambda: kernels.first_mismatch(ops, a, b, outs, n, False, use_numba=False),
                   args.repeat)
    print(f"numpy  simulate {t_np * 1e3:9.2f} ms   first_mismatch {m_np * 1e3:9.2f} ms")
    if not kernels.HAVE_NUMBA:
        print("numba  disabled (OPTIMULT_NO_NUMBA set or numba missing)")
        return
    # warm the JIT / on-disk cache outside the timed region
    kernels.simulate(ops, a, b, n_inputs, words[:1], use_numba=True)
    assert kernels.first_mismatch(ops, a, b, outs, n, False, use_numba=True) == -1
    t_nb = best_of(lambda: kernels.simulate(ops, a, b, n_inputs, words, use_numba=True),
                   args.repeat)
    m_nb = best_of(lambda: kernels.first_mismatch(ops, a, b, outs, n, False, use_numba=True),
                   args.repeat)
    print(f"numba  simulate {t_nb * 1e3:9.2f} ms   first_mismatch {m_nb * 1e3:9.2f} ms")
    print(f"speedup simulate x{t_np / t_nb:.1f}   first_mismatch x{m_np / m_nb:.1f}")
    same = np.array_equal(kernels.simulate(ops, a, b, n_inputs, words, use_numba=True),
                          kernels.simulate(ops, a, b, n_inputs, words, use_numba=False))
    print(f"backends agree: {same}")


if __name__ == "__main__":
    main()
