"""Exhaustive functional oracles and regression fixtures."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from . import kernels
from .arrays import ArraySpec
from .egraph import EGraph
from .netlist import Netlist, NetlistError, lower
from .netlist import simulate as simulate_netlist
from .term import ZERO, Term, and_, eval_many, not_, or_, p, q, var, xor

MAX_EXHAUSTIVE_INPUTS = 24


@dataclass
class Verdict:
    passed: bool
    cases: int
    counterexample: dict | None = None
    detail: str = ""

    def __bool__(self):
        return self.passed

    def to_dict(self) -> dict:
        out = {"pass": self.passed, "cases": self.cases}
        if self.counterexample is not None:
            out["counterexample"] = self.counterexample
        if self.detail:
            out["detail"] = self.detail
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _counterexample(t: int, spec: ArraySpec, actual: int) -> dict:
    n = spec.width
    pv = t & ((1 << n) - 1)
    qv = pv if spec.square else t >> n
    hex_digits = (spec.n_inputs + 3) // 4
    out = {"input": f"0x{t:0{hex_digits}x}", "p": pv, "expected": pv * qv, "actual": actual}
    if not spec.square:
        out["q"] = qv
    return out


def exhaustive_check(design, spec: ArraySpec, use_numba: bool | None = None) -> Verdict:
    """Compare a design (output-bit terms LSB first, or a Netlist) against the
    exact product over every input assignment."""
    if spec.n_inputs > MAX_EXHAUSTIVE_INPUTS:
        raise ValueError(f"{spec.n_inputs} inputs is too many for exhaustive checking")
    cases = 1 << spec.n_inputs
    if isinstance(design, Netlist):
        nl = design
        if nl.width != spec.width or nl.square != spec.square:
            raise ValueError("netlist does not match the array spec")
        bits = None
    else:
        bits = list(design)
        try:
            nl = lower(bits, spec.width, spec.square)
        except NetlistError:
            nl = None
    if nl is not None:
        ops, a, b, outs = nl.arrays()
        t = kernels.first_mismatch(ops, a, b, outs, spec.width, spec.square, use_numba)
        if t < 0:
            return Verdict(True, cases)
        actual = int(simulate_netlist(nl, t + 1, use_numba)[t])
        return Verdict(False, cases, _counterexample(t, spec, actual))
    # general terms (rows, compressors): vectorized valuation
    idx = np.arange(cases, dtype=np.int64)
    n = spec.width
    env = {f"p{i}": (idx >> i) & 1 for i in range(n)}
    if not spec.square:
        env.update({f"q{i}": (idx >> (n + i)) & 1 for i in range(n)})
    vals = eval_many(bits, env)
    got = np.zeros(cases, dtype=np.int64)
    for k, v in enumerate(vals):
        got += np.broadcast_to(np.asarray(v, dtype=np.int64), idx.shape) << k
    pv = idx & ((1 << n) - 1)
    qv = pv if spec.square else idx >> n
    bad = np.nonzero(got != pv * qv)[0]
    if len(bad):
        t = int(bad[0])
        return Verdict(False, cases, _counterexample(t, spec, int(got[t])))
    return Verdict(True, cases)


def unpack_row(t: Term, width: int) -> list[Term]:
    """Output bits (LSB first) of a row-shaped design, padded/truncated."""
    slots = list(t.children) if t.op == "row" else [t]
    bits = list(reversed(slots))
    if len(bits) < width:
        bits += [ZERO] * (width - len(bits))
    return bits[:width]


# reference fixtures: 3-bit squarer outputs and the two compressors

def squarer3_formulas() -> list[Term]:
    """o0..o5 of the optimized 3-bit squarer."""
    p0, p1, p2 = p(0), p(1), p(2)
    return [
        p0,
        ZERO,
        and_(p1, not_(p0)),
        and_(p0, xor(p2, p1)),
        and_(or_(p0, not_(p1)), p2),
        and_(p2, p1),
    ]


def _pp(i, j):
    return and_(p(i), q(j))


def ta_formulas():
    """Reference triangle adder bits (TA0, TA1, TA2)."""
    a, b, c = _pp(2, 1), _pp(1, 2), _pp(2, 2)
    return [xor(a, b), and_(c, not_(_pp(1, 1))), and_(a, b)]


def ta_free_formulas():
    """The same shape over free bits a, b, c (TA1 read as c & ~(a & b))."""
    a, b, c = var("a", 0), var("b", 0), var("c", 0)
    return [xor(a, b), and_(c, not_(and_(a, b))), and_(a, b)], (a, b, c)


def pa_k():
    """Reference K, grouped (p2 ^ ((p2q0 ^ p1 ^ p0q2) & p0 & p1 & q0)) & q1."""
    inner = and_(and_(and_(xor(xor(_pp(2, 0), p(1)), _pp(0, 2)), p(0)), p(1)), q(0))
    return and_(xor(p(2), inner), q(1))


def fa_carry(a, b, c):
    return or_(and_(a, b), and_(c, xor(a, b)))


def pa_formulas(alternative: bool = False):
    """Reference P-adder bits PA0..PA3; ``alternative`` swaps in the
    hand-derived PA3."""
    p2q0, p1q1, p0q2 = _pp(2, 0), _pp(1, 1), _pp(0, 2)
    carry = fa_carry(p2q0, p1q1, p0q2)
    k = pa_k()
    pa0 = xor(_pp(1, 0), _pp(0, 1))
    pa1 = xor(and_(p1q1, not_(_pp(0, 0))), xor(p2q0, p0q2))
    pa2 = xor(k, carry)
    if alternative:
        pa3 = and_(_pp(2, 1), or_(and_(and_(p(0), q(0)), q(2)),
                                  and_(p(1), xor(q(0), p0q2))))
    else:
        pa3 = and_(k, carry)
    return [pa0, pa1, pa2, pa3]


def _fixture_env(names):
    idx = np.arange(1 << len(names), dtype=np.int64)
    # first name is the most significant enumeration bit
    return idx, {nm: (idx >> (len(names) - 1 - i)) & 1 for i, nm in enumerate(names)}


def _check_identity(lhs_bits, weights, rhs_terms, rhs_weights, names, label):
    idx, env = _fixture_env(names)
    lv = eval_many(lhs_bits, env)
    rv = eval_many(rhs_terms, env)
    left = sum(np.broadcast_to(v, idx.shape) * w for v, w in zip(lv, weights))
    right = sum(np.broadcast_to(v, idx.shape) * w for v, w in zip(rv, rhs_weights))
    bad = np.nonzero(left != right)[0]
    if len(bad):
        k = int(bad[0])
        cex = {nm: int(env[nm][k]) for nm in names}
        cex["lhs"] = int(left[k])
        cex["rhs"] = int(right[k])
        return Verdict(False, len(idx), cex, label)
    return Verdict(True, len(idx), None, label)


PQ_NAMES = ["p2", "p1", "p0", "q2", "q1", "q0"]


def check_ta() -> Verdict:
    """4*TA2 + 2*TA1 + TA0 == 2*p2q2 + p2q1 + p1q2 over all 64 (p, q)."""
    return _check_identity(ta_formulas(), [1, 2, 4],
                           [_pp(2, 2), _pp(2, 1), _pp(1, 2)], [2, 1, 1],
                           PQ_NAMES, "triangle adder under correlation")


def check_ta_free() -> Verdict:
    """The triangle adder identity with uncorrelated inputs (expected to fail)."""
    bits, (a, b, c) = ta_free_formulas()
    return _check_identity(bits, [1, 2, 4], [c, a, b], [2, 1, 1], ["a0", "b0", "c0"],
                           "triangle adder over free bits")


def check_pa(alternative: bool = False) -> Verdict:
    rhs = [_pp(2, 1), _pp(2, 0), _pp(1, 1), _pp(0, 2), _pp(1, 0), _pp(0, 1)]
    label = "p-adder (alternative PA3)" if alternative else "p-adder reference"
    return _check_identity(pa_formulas(alternative), [1, 2, 4, 8],
                           rhs, [4, 2, 2, 2, 1, 1], PQ_NAMES, label)


def check_pa_alternative_equivalence() -> Verdict:
    """Whether reference and alternative PA3 agree bitwise (they differ at p = q = 7)."""
    reference = pa_formulas()[3]
    alt = pa_formulas(True)[3]
    return _check_identity([reference], [1], [alt], [1], PQ_NAMES, "PA3 reference vs alternative")


def check_ta_pa_fixtures() -> dict[str, Verdict]:
    return {
        "ta": check_ta(),
        "ta_free_bits": check_ta_free(),
        "pa": check_pa(),
        "pa_alternative": check_pa(alternative=True),
    }


# e-graph consistency

def _realizations(g: EGraph, cid: int, limit: int = 4, depth: int = 6) -> list[Term]:
    """Up to ``limit`` distinct tree realizations of a class (bounded depth,
    cycle-free)."""
    memo: dict[tuple[int, int], list[Term]] = {}

    def go(c, d, stack):
        c = g.find(c)
        key = (c, d)
        if key in memo:
            return memo[key]
        out: list[Term] = []
        if d == 0 or c in stack:
            return out
        stack = stack | {c}
        for node in g.classes[c]:
            kid_options = []
            for k in node[2]:
                opts = go(k, d - 1, stack)
                if not opts:
                    kid_options = None
                    break
                kid_options.append(opts[:2])
            if kid_options is None:
                continue
            for combo in itertools.product(*kid_options):
                t = Term(node[0], combo, node[1])
                if t not in out:
                    out.append(t)
                if len(out) >= limit:
                    break
            if len(out) >= limit:
                break
        memo[key] = out
        return out

    return go(cid, depth, frozenset())


def eclass_consistency(g: EGraph, samples: int | np.ndarray = 64, seed: int = 0,
                       limit: int = 4, depth: int = 6) -> Verdict:
    """All sampled realizations of every class agree on value (mod 2**W for
    classes touched by a modulo rewrite)."""
    g.rebuild()
    names = sorted({f"{n[1][0]}{n[1][1]}" for n in g.memo if n[0] == "var"})
    if isinstance(samples, int):
        if len(names) <= 12:
            idx = np.arange(1 << len(names), dtype=np.int64)
        else:
            rng = np.random.default_rng(seed)
            idx = rng.integers(0, 1 << min(len(names), 62), size=samples, dtype=np.int64)
    else:
        idx = np.asarray(samples, dtype=np.int64)
    env = {nm: (idx >> i) & 1 for i, nm in enumerate(names)}
    checked = 0
    mask = None if g.output_width is None else (1 << g.output_width) - 1
    for cid in sorted(g.classes):
        reals = _realizations(g, cid, limit, depth)
        if len(reals) < 2:
            continue
        vals = [np.broadcast_to(np.asarray(v, dtype=np.int64), idx.shape)
                for v in eval_many(reals, env)]
        modulo = cid in g.modulo and mask is not None
        ref = vals[0] & mask if modulo else vals[0]
        for t, v in zip(reals[1:], vals[1:]):
            cur = v & mask if modulo else v
            bad = np.nonzero(cur != ref)[0]
            checked += len(idx)
            if len(bad):
                k = int(bad[0])
                cex = {nm: int(env[nm][k]) for nm in names}
                return Verdict(False, checked, {
                    "class": cid, "assignment": cex,
                    "terms": [str(reals[0]), str(t)],
                    "values": [int(ref[k]), int(cur[k])],
                }, "e-class realizations disagree")
    return Verdict(True, checked)


__all__ = [
    "Verdict", "exhaustive_check", "unpack_row", "squarer3_formulas", "check_ta",
    "check_ta_free", "check_pa", "check_ta_pa_fixtures", "eclass_consistency",
    "check_pa_alternative_equivalence", "ta_formulas", "pa_formulas",
]
