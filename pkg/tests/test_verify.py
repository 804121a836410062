import json

import pytest

from optimult.arrays import ArraySpec, build_and_array
from optimult.egraph import EGraph, RunLimits, run
from optimult.netlist import lower, simulate
from optimult.rewrites import pattern_rule, phase1_rules
from optimult.term import ZERO, and_, or_, p, q, row, xor
from optimult.verify import (check_pa, check_pa_alternative_equivalence, check_ta,
                             check_ta_free, check_ta_pa_fixtures, eclass_consistency,
                             exhaustive_check, squarer3_formulas, unpack_row)

S3 = ArraySpec(3, True)


def graph_of(t, width=None):
    g = EGraph(width)
    g.root = g.add_term(t)
    g.rebuild()
    return g


def test_squarer3_formulas_pass():
    v = exhaustive_check(squarer3_formulas(), S3)
    assert v.passed and v.cases == 8 and v.counterexample is None


def test_mutated_o3_caught():
    bits = squarer3_formulas()
    bits[3] = or_(p(0), xor(p(2), p(1)))
    v = exhaustive_check(bits, S3)
    assert not v.passed
    assert v.counterexample["input"] == "0x1"
    assert v.counterexample["expected"] == 1 and v.counterexample["actual"] == 9


@pytest.mark.parametrize("k", range(6))
def test_every_single_bit_mutation_caught(k):
    bits = squarer3_formulas()
    nl = lower(bits, 3, True)
    for g in range(len(nl.gates)):
        kind, a, b = nl.gates[g]
        for other in ("and", "or", "xor"):
            if other == kind or kind == "not":
                continue
            mutant = lower(bits, 3, True)
            mutant.gates[g] = (other, a, b)
            ref = exhaustive_check(mutant, S3)
            changed = any(simulate(mutant) != simulate(nl))
            assert ref.passed != changed
    # perturbing output bit k is caught
    flipped = list(bits)
    flipped[k] = xor(flipped[k], p(0)) if k != 1 else p(0)
    assert not exhaustive_check(flipped, S3).passed


def test_general_terms_fall_back():
    arr = build_and_array(ArraySpec(3))
    assert exhaustive_check([arr], ArraySpec(3)).cases == 64
    v = exhaustive_check(unpack_row(row(arr), 6), ArraySpec(3))
    assert v.passed


def test_multiplier_counterexample_has_q():
    v = exhaustive_check([and_(p(0), q(0)), ZERO, ZERO, ZERO], ArraySpec(2))
    assert not v.passed
    cex = v.counterexample
    assert cex["p"] * cex["q"] == cex["expected"]
    d = json.loads(v.to_json())
    assert d["pass"] is False and d["cases"] == 16


def test_unpack_row_pads():
    bits = unpack_row(row(p(1), p(0)), 4)
    assert bits == [p(0), p(1), ZERO, ZERO]


def test_ta_fixture():
    v = check_ta()
    assert v.passed and v.cases == 64


def test_ta_free_bits_fail():
    v = check_ta_free()
    assert not v.passed
    cex = v.counterexample
    assert (cex["a0"], cex["b0"], cex["c0"]) == (1, 1, 0)


def test_pa_fixture_reference():
    # reference PA3 = K * FAc disagrees with the arithmetic definition at p = q = 7
    v = check_pa()
    assert not v.passed
    cex = v.counterexample
    assert all(cex[k] == 1 for k in ("p0", "p1", "p2", "q0", "q1", "q2"))
    assert (cex["lhs"], cex["rhs"]) == (4, 12)


def test_pa_alternative():
    assert check_pa(alternative=True).passed
    assert not check_pa_alternative_equivalence().passed


def test_fixture_bundle():
    d = check_ta_pa_fixtures()
    assert set(d) == {"ta", "ta_free_bits", "pa", "pa_alternative"}
    assert d["ta"].passed and not d["ta_free_bits"].passed and d["pa_alternative"].passed


def test_consistency_fresh_graph():
    assert eclass_consistency(graph_of(build_and_array(ArraySpec(2)))).passed


def test_consistency_after_phase1_exhaustive():
    g = graph_of(build_and_array(ArraySpec(2)), 4)
    run(g, phase1_rules(), RunLimits(16))
    v = eclass_consistency(g)
    assert v.passed and v.cases >= 16


def test_consistency_catches_bad_rule():
    g = graph_of(or_(p(0), q(0)))
    bad = pattern_rule("or-as-and", "two", "(or ?a ?b)", "(and ?a ?b)")
    run(g, [bad], RunLimits(1))
    v = eclass_consistency(g)
    assert not v.passed
    assert v.counterexample["values"][0] != v.counterexample["values"][1]


def test_too_wide():
    with pytest.raises(ValueError):
        exhaustive_check([ZERO], ArraySpec(13))
