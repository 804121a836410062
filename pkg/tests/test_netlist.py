import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optimult.netlist import (Netlist, NetlistError, emit_verilog, lower, simulate, stats,
                              to_terms)
from optimult.term import ONE, ZERO, Term, and_, eval_many, not_, or_, p, q, xor
from optimult.verify import squarer3_formulas


def test_input_passthrough():
    nl = lower(squarer3_formulas(), 3, True)
    assert nl.outputs[0] == nl.input_signal("p", 0)
    assert nl.outputs[1] == 0


def test_shared_xor():
    x = xor(p(2), p(1))
    nl = lower([and_(x, p(0)), or_(x, p(0))], 3, True)
    assert sum(1 for g in nl.gates if g[0] == "xor") == 1
    unshared = lower([and_(x, p(0)), or_(x, p(0))], 3, True, share=False)
    assert sum(1 for g in unshared.gates if g[0] == "xor") == 2


def test_squarer3_gate_count():
    bits = squarer3_formulas()
    distinct = set()
    for t in bits:
        stack = [t]
        while stack:
            n = stack.pop()
            if n.op in ("and", "or", "xor", "not"):
                distinct.add(n)
            stack.extend(n.children)
    assert stats(lower(bits, 3, True))["total"] == len(distinct)


def test_stats_examples():
    o = squarer3_formulas()
    assert stats(lower([o[4]], 3, True))["depth"] == 3
    assert stats(lower([o[0]], 3, True))["depth"] == 0
    assert stats(lower([o[3]], 3, True))["gates"] == {"and": 1, "xor": 1}


def test_verilog_shape():
    nl = lower(squarer3_formulas(), 3, True)
    text = emit_verilog(nl, "square3")
    assert text.startswith("module square3 (p, r);\n  input [2:0] p;\n  output [5:0] r;\n")
    assert "  assign r[1] = 1'b0;\n" in text
    assert "  assign r[0] = p[0];\n" in text
    assert "~p[1]" in text
    assert text.rstrip().endswith("endmodule")
    assert emit_verilog(nl, "square3") == text


def test_verilog_multiplier_ports():
    nl = lower([and_(p(0), q(0)), ONE], 1, False)
    text = emit_verilog(nl, "m")
    assert "module m (p, q, r);" in text and "input [0:0] p, q;" in text
    assert "assign r[1] = 1'b1;" in text


@pytest.mark.parametrize("name", ["module", "wire", "1abc", "a-b", ""])
def test_bad_module_names(name):
    with pytest.raises(NetlistError):
        emit_verilog(lower([p(0)], 1, True), name)


def test_lower_rejects_cells():
    with pytest.raises(NetlistError):
        lower([Term("has", (p(0), p(1)))])
    with pytest.raises(NetlistError):
        lower([q(0)], 2, True)


def test_to_terms_roundtrip():
    bits = squarer3_formulas()
    nl = lower(bits, 3, True)
    back = to_terms(nl)
    idx = np.arange(8)
    env = {f"p{i}": (idx >> i) & 1 for i in range(3)}
    for a, b in zip(eval_many(bits, env), eval_many(back, env)):
        assert np.array_equal(np.broadcast_to(a, idx.shape), np.broadcast_to(b, idx.shape))


def test_simulate_squarer3():
    got = simulate(lower(squarer3_formulas(), 3, True))
    assert list(got) == [v * v for v in range(8)]


leaves = st.sampled_from([p(0), p(1), q(0), q(1), ZERO, ONE])
gate_terms = st.recursive(
    leaves,
    lambda kids: st.one_of(
        st.builds(not_, kids),
        st.tuples(st.sampled_from(["and", "or", "xor"]), kids, kids).map(
            lambda x: Term(x[0], (x[1], x[2])))),
    max_leaves=12)


@settings(max_examples=60, deadline=None)
@given(st.lists(gate_terms, min_size=1, max_size=4))
def test_lowering_preserves_semantics(bits):
    idx = np.arange(16)
    env = {"p0": idx & 1, "p1": (idx >> 1) & 1, "q0": (idx >> 2) & 1, "q1": (idx >> 3) & 1}
    want = np.zeros(16, dtype=np.int64)
    for i, v in enumerate(eval_many(bits, env)):
        want += np.broadcast_to(v, idx.shape).astype(np.int64) << i
    shared = simulate(lower(bits, 2, False))
    unshared = simulate(lower(bits, 2, False, share=False))
    assert np.array_equal(shared, want)
    assert np.array_equal(unshared, want)


def test_netlist_input_errors():
    nl = Netlist(2, True)
    with pytest.raises(NetlistError):
        nl.input_signal("p", 2)
