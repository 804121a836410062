"""Two-phase optimization driver.

Each phase repeatedly seeds a fresh e-graph with the current design, grows
it under the phase's rules, and extracts with the phase's cost model; the
loop continues while the extracted cost strictly improves.
"""
from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .arrays import ArraySpec, build_and_array
from .cost import PENALTY, Cost, CostModel, ShapeUnreachable, extract, gate_depth
from .egraph import EGraph, RunLimits, run
from .netlist import lower, stats
from .rewrites import phase1_rules, phase2_rules, split_product
from .term import GATE_OPS, ZERO, Term, p, parse, postorder, q, row, serialize, substitute, sum_
from .verify import exhaustive_check, unpack_row

log = logging.getLogger(__name__)

GATE_LEVEL = GATE_OPS | {"var", "const"}


@dataclass
class PipelineConfig:
    phase1: RunLimits = field(default_factory=lambda: RunLimits(16, 100_000))
    phase2: RunLimits = field(default_factory=lambda: RunLimits(16, 200_000))
    dnc: bool = True
    dnc_threshold_mult: int = 6
    dnc_threshold_square: int = 7
    cache: dict = field(default_factory=dict)
    cache_dir: str | None = None
    # safety net only: the phase loop terminates on its own
    max_rounds: int = 64
    jobs: int = 1
    # opt-in Wallace-stage rule (see rewrites.compress_stage_rule)
    compress_stage: bool = False

    def __post_init__(self):
        if min(self.dnc_threshold_mult, self.dnc_threshold_square) < 2:
            raise ValueError("divide-and-conquer thresholds must be >= 2")

    def threshold(self, square: bool) -> int:
        return self.dnc_threshold_square if square else self.dnc_threshold_mult


@dataclass
class PhaseTrace:
    phase: str
    rounds: list[dict] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return sum(r["iterations"] for r in self.rounds)

    @property
    def nodes(self) -> int:
        return max((r["nodes"] for r in self.rounds), default=0)

    @property
    def trajectory(self) -> list[list[int]]:
        return [r["cost"] for r in self.rounds]

    def to_dict(self) -> dict:
        return {
            "phase": self.phase,
            "rounds": len(self.rounds),
            "iterations": self.iterations,
            "nodes": self.nodes,
            "stop_reason": self.rounds[-1]["stop_reason"] if self.rounds else None,
            "cost_trajectory": self.trajectory,
            "round_details": self.rounds,
        }


@dataclass
class RunReport:
    width: int
    square: bool
    phases: list[PhaseTrace] = field(default_factory=list)
    delay: int = 0
    gates: int = 0
    wall_ms: float = 0.0
    dnc: bool = False
    sub_designs: dict = field(default_factory=dict)
    verified: bool | None = None
    cost_tables: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return sum(t.iterations for t in self.phases)

    @property
    def nodes(self) -> int:
        return max((t.nodes for t in self.phases), default=0)

    @property
    def stop_reason(self):
        return self.phases[-1].rounds[-1]["stop_reason"] if self.phases and self.phases[-1].rounds else None

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "square": self.square,
            "dnc": self.dnc,
            "phases": [t.to_dict() for t in self.phases],
            "iterations": self.iterations,
            "nodes": self.nodes,
            "stop_reason": self.stop_reason,
            "delay": self.delay,
            "gates": self.gates,
            "verified": self.verified,
            "sub_designs": self.sub_designs,
            "cost_tables": self.cost_tables,
            "wall_ms": round(self.wall_ms, 3),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _rules(phase: str, config: PipelineConfig):
    if phase == "one":
        return phase1_rules(config.compress_stage)
    if phase == "two":
        return phase2_rules()
    if phase == "merged":
        return phase1_rules(config.compress_stage) + phase2_rules()
    raise ValueError(f"unknown phase {phase!r}")


def _limits(phase: str, config: PipelineConfig) -> RunLimits:
    return config.phase1 if phase == "one" else config.phase2


def _cost_list(c: Cost) -> list[int]:
    return [c.delay, c.area]


def run_phase(expr: Term, phase: str, config: PipelineConfig | None = None,
              output_width: int | None = None):
    """Phase loop with re-initialization -> (best term, best cost, trace).

    ``phase`` is ``"one"``, ``"two"`` or ``"merged"`` (both rule sets under the
    phase-two model, used for comparison runs)."""
    config = config or PipelineConfig()
    rules = _rules(phase, config)
    model = CostModel("one" if phase == "one" else "two")
    limits = _limits(phase, config)
    trace = PhaseTrace(phase)
    best_term, best_cost = expr, None
    for rnd in range(config.max_rounds):
        g = EGraph(output_width)
        g.root = g.add_term(best_term)
        g.rebuild()
        res = run(g, rules, limits)
        term, cost = extract(g, g.root, model, allow_penalty=True)
        trace.rounds.append({
            "round": rnd,
            "iterations": res.iterations,
            "nodes": res.nodes,
            "classes": res.classes,
            "stop_reason": res.stop_reason.value,
            "cost": _cost_list(cost),
            "seconds": round(res.seconds, 4),
            "applied": dict(sorted(res.applied.items())),
        })
        log.debug("phase %s round %d: %s, %d iterations, %d nodes, cost %s",
                  phase, rnd, res.stop_reason.value, res.iterations, res.nodes, cost)
        if best_cost is not None and not cost < best_cost:
            break
        best_term, best_cost = term, cost
    if best_cost.delay >= PENALTY:
        raise ShapeUnreachable(model.phase, best_cost,
                               f"{trace.iterations} iterations over {len(trace.rounds)} rounds")
    return best_term, best_cost, trace


# divide and conquer

def _operand(prefix: str, n: int, width: int) -> list[Term]:
    """MSB-first operand bits, zero-extended to ``width``."""
    bits = [Term("var", (), (prefix, i)) if i < n else ZERO for i in range(width)]
    return list(reversed(bits))


def _splice(design: Term, h: int, x: list[Term], y: list[Term] | None, shift: int) -> Term:
    """Instantiate a cached h-bit design (a row of output bits) on operand
    slices and shift it into place."""
    mapping = {}
    for i, t in enumerate(reversed(x)):
        mapping[p(i)] = t
    if y is not None:
        for i, t in enumerate(reversed(y)):
            mapping[q(i)] = t
    inst = substitute(design, mapping)
    slots = list(inst.children) if inst.op == "row" else [inst]
    return row(*slots, *([ZERO] * shift))


def dnc_expression(spec: ArraySpec, sub: dict[tuple[int, bool], Term]) -> Term:
    """Sum of shifted sub-design rows for a width above the threshold."""
    n = spec.width
    m = n + (n % 2)
    h = m // 2
    a = _operand("p", n, m)
    if spec.square:
        ah, al = a[:h], a[h:]
        rows = [
            _splice(sub[(h, True)], h, ah, None, m),
            _splice(sub[(h, False)], h, ah, al, h + 1),
            _splice(sub[(h, True)], h, al, None, 0),
        ]
    else:
        b = _operand("q", n, m)
        rows = [_splice(sub[(h, False)], h, x, y, k) for x, y, k in split_product(a, b)]
    return sum_(*rows)


def dnc_subspecs(spec: ArraySpec) -> list[ArraySpec]:
    h = (spec.width + spec.width % 2) // 2
    if spec.square:
        return [ArraySpec(h, True), ArraySpec(h, False)]
    return [ArraySpec(h, False)]


# cache

def _cache_path(config: PipelineConfig, spec: ArraySpec) -> Path | None:
    if not config.cache_dir:
        return None
    return Path(config.cache_dir) / f"{spec.tag}.sexp"


def cache_lookup(config: PipelineConfig, spec: ArraySpec) -> Term | None:
    key = (spec.width, spec.square)
    hit = config.cache.get(key)
    if hit is None:
        path = _cache_path(config, spec)
        if path is None or not path.exists():
            return None
        try:
            hit = parse(path.read_text())
        except ValueError as e:
            log.warning("ignoring unreadable cache entry %s: %s", path, e)
            return None
    verdict = exhaustive_check(unpack_row(hit, spec.output_width), spec)
    if not verdict.passed:
        log.warning("cache entry for %s failed re-verification; discarding", spec.tag)
        config.cache.pop(key, None)
        return None
    config.cache[key] = hit
    return hit


def cache_store(config: PipelineConfig, spec: ArraySpec, design: Term) -> None:
    config.cache[(spec.width, spec.square)] = design
    path = _cache_path(config, spec)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(serialize(design) + "\n")
        os.replace(tmp, path)


# driver

def _sub_optimize(args):
    spec, config = args
    bits, report = optimize(spec, config)
    return spec, bits, report


def optimize(spec: ArraySpec, config: PipelineConfig | None = None):
    """Synthesize ``spec`` -> (2n gate-level output bits LSB first, RunReport)."""
    config = config or PipelineConfig()
    t0 = time.perf_counter()
    report = RunReport(spec.width, spec.square)
    report.cost_tables = {ph: CostModel(ph).table() for ph in ("one", "two")}
    W = spec.output_width
    if config.dnc and spec.width > config.threshold(spec.square):
        report.dnc = True
        sub = {}
        todo = []
        for s in dnc_subspecs(spec):
            hit = cache_lookup(config, s)
            if hit is not None:
                sub[(s.width, s.square)] = hit
                report.sub_designs[s.tag] = {"cached": True}
            else:
                todo.append(s)
        if config.jobs > 1 and len(todo) > 1:
            with ProcessPoolExecutor(min(config.jobs, len(todo))) as pool:
                done = list(pool.map(_sub_optimize, [(s, config) for s in todo]))
        else:
            done = [_sub_optimize((s, config)) for s in todo]
        for s, bits, sub_report in done:
            design = row(*reversed(bits))
            cache_store(config, s, design)
            sub[(s.width, s.square)] = design
            report.sub_designs[s.tag] = {"cached": False, "report": sub_report.to_dict()}
        expr = dnc_expression(spec, sub)
    else:
        expr = build_and_array(spec)
    t1, _, trace1 = run_phase(expr, "one", config, W)
    report.phases.append(trace1)
    t2, _, trace2 = run_phase(t1, "two", config, W)
    report.phases.append(trace2)
    bits = unpack_row(t2, W)
    for b in bits:
        for n in postorder(b):
            if n.op not in GATE_LEVEL:
                raise RuntimeError(f"non-gate node {n.op!r} survived phase two")
    nl = lower(bits, spec.width, spec.square)
    st = stats(nl)
    report.delay = max(gate_depth(b) for b in bits)
    report.gates = st["total"]
    report.wall_ms = (time.perf_counter() - t0) * 1000
    return bits, report


def merged_run(spec: ArraySpec, config: PipelineConfig | None = None):
    """Single phase with both rule sets under the phase-two model (for
    comparing iteration counts against the phased flow)."""
    config = config or PipelineConfig()
    term, cost, trace = run_phase(build_and_array(spec), "merged", config, spec.output_width)
    return unpack_row(term, spec.output_width), cost, trace
