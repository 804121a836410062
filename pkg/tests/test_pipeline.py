import json

import pytest

from optimult.arrays import ArraySpec, build_and_array
from optimult.cost import PENALTY, ShapeUnreachable, gate_depth
from optimult.egraph import RunLimits
from optimult.netlist import lower, stats
from optimult.pipeline import (PipelineConfig, cache_lookup, cache_store, dnc_expression,
                               dnc_subspecs, merged_run, optimize, run_phase)
from optimult.term import ZERO, and_, eval_term, p, postorder, q, row, serialize
from optimult.verify import exhaustive_check, squarer3_formulas

GATES = {"and", "or", "xor", "not", "var", "const"}


def strictly_decreasing_until_last(traj):
    body = traj[:-1]
    return all(a > b for a, b in zip(body, body[1:])) and (len(traj) < 2 or traj[-1] >= traj[-2])


def test_phase1_two_bit():
    spec = ArraySpec(2)
    term, cost, trace = run_phase(build_and_array(spec), "one", output_width=4)
    assert term.op == "row" and len(term.children) == 4
    assert cost.delay < PENALTY
    assert exhaustive_check(list(reversed(term.children)), spec).passed
    assert strictly_decreasing_until_last(trace.trajectory)


def test_optimal_input_stops_after_one_round():
    bits = squarer3_formulas()
    design = row(*reversed(bits))
    term, cost, trace = run_phase(design, "two", output_width=6)
    assert len(trace.rounds) == 2
    assert trace.trajectory[1] >= trace.trajectory[0]


def test_unreachable_raises():
    config = PipelineConfig(phase1=RunLimits(0))
    with pytest.raises(ShapeUnreachable) as err:
        run_phase(build_and_array(ArraySpec(3)), "one", config, 6)
    assert err.value.phase == "one"


@pytest.mark.parametrize("width,square", [(2, False), (2, True), (3, True), (3, False)])
def test_small_designs(synth, width, square):
    spec = ArraySpec(width, square)
    bits, report = synth(width, square)
    assert len(bits) == spec.output_width
    assert all(n.op in GATES for b in bits for n in postorder(b))
    assert exhaustive_check(bits, spec).passed
    assert report.delay == max(gate_depth(b) for b in bits)
    assert report.delay == stats(lower(bits, width, square))["depth"]
    for tr in report.phases:
        assert strictly_decreasing_until_last(tr.trajectory)


def test_squarer3_matches_formulas(synth):
    bits, report = synth(3, True)
    ref = squarer3_formulas()
    for i in range(6):
        for v in range(8):
            env = {f"p{k}": (v >> k) & 1 for k in range(3)}
            assert eval_term(bits[i], env) == eval_term(ref[i], env)
    assert report.delay <= 3


def test_report_json_keys(synth):
    _, report = synth(2, False)
    d = json.loads(report.to_json())
    for key in ("phases", "iterations", "nodes", "stop_reason", "delay", "gates", "wall_ms"):
        assert key in d
    assert [ph["phase"] for ph in d["phases"]] == ["one", "two"]
    assert d["iterations"] == sum(ph["iterations"] for ph in d["phases"])
    assert d["cost_tables"]["two"]["fas"] == "penalty"


def test_dnc_expression_value():
    for spec in (ArraySpec(4), ArraySpec(4, True), ArraySpec(3), ArraySpec(5, True)):
        h = (spec.width + 1) // 2
        sub = {(h, False): build_and_array(ArraySpec(h)),
               (h, True): build_and_array(ArraySpec(h, True))}
        sub = {k: v for k, v in sub.items() if k in {(s.width, s.square) for s in dnc_subspecs(spec)}}
        expr = dnc_expression(spec, sub)
        assert exhaustive_check([expr], spec).passed


def test_dnc_small_threshold(tmp_path):
    config = PipelineConfig(dnc_threshold_mult=2, dnc_threshold_square=2, cache_dir=str(tmp_path))
    bits, report = optimize(ArraySpec(4, True), config)
    assert report.dnc and exhaustive_check(bits, ArraySpec(4, True)).passed
    assert (tmp_path / "m2s.sexp").exists() and (tmp_path / "m2m.sexp").exists()
    assert set(report.sub_designs) == {"m2s", "m2m"}


def test_cache_reverifies(tmp_path):
    config = PipelineConfig(cache_dir=str(tmp_path))
    spec = ArraySpec(2)
    good = row(and_(p(1), q(1)), ZERO, ZERO, and_(p(0), q(0)))
    cache_store(config, spec, good)
    fresh = PipelineConfig(cache_dir=str(tmp_path))
    assert cache_lookup(fresh, spec) is None  # wrong design: discarded
    (tmp_path / "m2m.sexp").write_text("(row (and p0 q0)")
    assert cache_lookup(PipelineConfig(cache_dir=str(tmp_path)), spec) is None
    bits, _ = optimize(spec)
    cache_store(config, spec, row(*reversed(bits)))
    text = (tmp_path / "m2m.sexp").read_text()
    assert text.strip() == serialize(row(*reversed(bits)))
    assert cache_lookup(PipelineConfig(cache_dir=str(tmp_path)), spec) is not None


def test_merged_run_correct():
    spec = ArraySpec(2)
    bits, cost, trace = merged_run(spec)
    assert exhaustive_check(bits, spec).passed
    assert trace.phase == "merged"


def test_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig(dnc_threshold_mult=1)
    assert PipelineConfig().threshold(True) == 7
